#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bandreg/dualnet.hpp"
#include "bandreg/shooting.hpp"

namespace bandreg::io
{
    static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

    namespace fs = std::filesystem;
    using nlohmann::json;

    inline constexpr std::uint32_t format_version = 1;

    namespace detail
    {
        inline std::vector<char> read_file(const fs::path& path)
        {
            std::ifstream in(path, std::ios::binary);
            if (!in)
            {
                throw IoError("cannot open " + path.string());
            }
            return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        }

        inline void write_file(const fs::path& path, std::string_view bytes)
        {
            if (path.has_parent_path())
            {
                fs::create_directories(path.parent_path());
            }
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out)
            {
                throw IoError("cannot write " + path.string());
            }
            out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            if (!out)
            {
                throw IoError("write failed for " + path.string());
            }
        }

        class Writer
        {
        public:
            explicit Writer(const char (&magic)[5]) { buf_.append(magic, 4); }

            void u32(std::uint32_t v) { raw(&v, sizeof v); }
            void f64(double v) { raw(&v, sizeof v); }
            void f64s(std::span<const double> v) { raw(v.data(), v.size_bytes()); }
            void cplxs(std::span<const cplx> v) { raw(v.data(), v.size_bytes()); }

            const std::string& bytes() const { return buf_; }

        private:
            void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
            std::string buf_;
        };

        class Reader
        {
        public:
            Reader(std::vector<char> bytes, std::string name) : buf_(std::move(bytes)), name_(std::move(name)) {}

            void expect_magic(const char (&magic)[5])
            {
                if (buf_.size() < 4 || std::memcmp(buf_.data(), magic, 4) != 0)
                {
                    throw FormatError(name_ + ": bad magic, expected " + std::string(magic, 4));
                }
                pos_ = 4;
            }

            std::uint32_t u32()
            {
                std::uint32_t v;
                raw(&v, sizeof v);
                return v;
            }

            double f64()
            {
                double v;
                raw(&v, sizeof v);
                return v;
            }

            void f64s(std::span<double> out) { raw(out.data(), out.size_bytes()); }
            void cplxs(std::span<cplx> out) { raw(out.data(), out.size_bytes()); }

            void expect_end() const
            {
                if (pos_ != buf_.size())
                {
                    throw FormatError(name_ + ": trailing bytes after payload");
                }
            }

            void check_version()
            {
                const auto v = u32();
                if (v != format_version)
                {
                    throw FormatError(name_ + ": unsupported version " + std::to_string(v));
                }
            }

            int dim()
            {
                const auto d = u32();
                if (d != 2 && d != 3)
                {
                    throw FormatError(name_ + ": dimension must be 2 or 3, got " + std::to_string(d));
                }
                return static_cast<int>(d);
            }

            std::array<int, 3> sizes(int d, std::uint32_t limit = 1u << 16)
            {
                std::array<int, 3> n{1, 1, 1};
                for (int k = 0; k < d; ++k)
                {
                    const auto v = u32();
                    if (v == 0 || v > limit)
                    {
                        throw FormatError(name_ + ": axis size out of range");
                    }
                    n[k] = static_cast<int>(v);
                }
                return n;
            }

            const std::string& name() const { return name_; }

        private:
            void raw(void* p, std::size_t n)
            {
                if (buf_.size() - pos_ < n)
                {
                    throw FormatError(name_ + ": truncated payload");
                }
                std::memcpy(p, buf_.data() + pos_, n);
                pos_ += n;
            }

            std::vector<char> buf_;
            std::string name_;
            std::size_t pos_ = 0;
        };

        inline json sizes_json(const Extents& e)
        {
            json a = json::array();
            for (int k = 0; k < e.dim; ++k)
            {
                a.push_back(e.n[k]);
            }
            return a;
        }
    } // namespace detail

    /// CRC-32 of a file, lowercase hex.
    inline std::string file_checksum(const fs::path& path)
    {
        const auto bytes = detail::read_file(path);
        const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
        char hex[9];
        std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
        return hex;
    }

    inline std::string text_checksum(std::string_view text)
    {
        const auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(text.data()), static_cast<uInt>(text.size()));
        char hex[9];
        std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
        return hex;
    }

    inline void write_json(const fs::path& path, const json& j) { detail::write_file(path, j.dump(2) + "\n"); }

    inline json read_json(const fs::path& path)
    {
        const auto bytes = detail::read_file(path);
        try
        {
            return json::parse(bytes.begin(), bytes.end());
        }
        catch (const json::exception& e)
        {
            throw FormatError(path.string() + ": " + e.what());
        }
    }

    inline fs::path sidecar_path(const fs::path& path)
    {
        auto p = path;
        p += ".json";
        return p;
    }

    // ---- SPIM: raw f64 image container ------------------------------------

    inline void save_image(const fs::path& path, const SpatialImage& img)
    {
        detail::Writer w("SPIM");
        const auto& e = img.extents();
        w.u32(format_version);
        w.u32(e.dim);
        for (int k = 0; k < e.dim; ++k)
        {
            w.u32(e.n[k]);
        }
        w.f64s(img.data());
        detail::write_file(path, w.bytes());
    }

    inline SpatialImage load_image(const fs::path& path)
    {
        detail::Reader r(detail::read_file(path), path.string());
        r.expect_magic("SPIM");
        r.check_version();
        const int d = r.dim();
        const Extents e(d, r.sizes(d));
        SpatialImage img(e);
        r.f64s(img.data());
        r.expect_end();
        return img;
    }

    // ---- PGM P5, 8- or 16-bit ----------------------------------------------

    /// Writes a 2D image clamped to [0, 1] as a 16-bit binary PGM; axis 1 runs
    /// along the rows. Samples are big-endian.
    inline void save_pgm(const fs::path& path, const SpatialImage& img)
    {
        const auto& e = img.extents();
        if (e.dim != 2)
        {
            throw std::invalid_argument("save_pgm: PGM holds 2D images only");
        }
        std::string out = "P5\n" + std::to_string(e.n[1]) + " " + std::to_string(e.n[0]) + "\n65535\n";
        out.reserve(out.size() + 2 * img.size());
        for (double x : img.data())
        {
            const double c = std::clamp(std::isfinite(x) ? x : 0.0, 0.0, 1.0);
            const auto q = static_cast<std::uint16_t>(std::lround(c * 65535.0));
            out.push_back(static_cast<char>(q >> 8));
            out.push_back(static_cast<char>(q & 0xff));
        }
        detail::write_file(path, out);
    }

    /// Raw PGM samples and maxval.
    struct PgmData
    {
        Extents extents;
        int maxval = 0;
        std::vector<std::uint16_t> samples;
    };

    inline PgmData read_pgm(const fs::path& path)
    {
        const auto bytes = detail::read_file(path);
        const std::string name = path.string();
        std::size_t pos = 0;
        auto skip_space = [&] {
            while (pos < bytes.size())
            {
                if (bytes[pos] == '#')
                {
                    while (pos < bytes.size() && bytes[pos] != '\n')
                    {
                        ++pos;
                    }
                }
                else if (std::isspace(static_cast<unsigned char>(bytes[pos])))
                {
                    ++pos;
                }
                else
                {
                    break;
                }
            }
        };
        auto number = [&] {
            skip_space();
            long v = 0;
            std::size_t start = pos;
            while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos])) && pos - start < 7)
            {
                v = v * 10 + (bytes[pos++] - '0');
            }
            if (pos == start)
            {
                throw FormatError(name + ": malformed PGM header");
            }
            return v;
        };
        if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5')
        {
            throw FormatError(name + ": not a binary PGM (P5)");
        }
        pos = 2;
        const long width = number();
        const long height = number();
        const long maxval = number();
        if (width < 1 || height < 1 || maxval < 1 || maxval > 65535)
        {
            throw FormatError(name + ": malformed PGM header");
        }
        if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
        {
            throw FormatError(name + ": malformed PGM header");
        }
        ++pos;
        const std::size_t count = static_cast<std::size_t>(width) * height;
        const std::size_t bps = maxval > 255 ? 2 : 1;
        if (bytes.size() - pos < count * bps)
        {
            throw FormatError(name + ": truncated payload");
        }
        PgmData d{Extents(2, {static_cast<int>(height), static_cast<int>(width), 1}), static_cast<int>(maxval),
                  std::vector<std::uint16_t>(count)};
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
        for (std::size_t i = 0; i < count; ++i)
        {
            d.samples[i] = bps == 2 ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
            if (d.samples[i] > maxval)
            {
                throw FormatError(name + ": sample exceeds maxval");
            }
        }
        return d;
    }

    /// Intensities rescaled to [0, 1] by maxval.
    inline SpatialImage load_pgm(const fs::path& path)
    {
        const auto d = read_pgm(path);
        SpatialImage img(d.extents);
        for (std::size_t i = 0; i < d.samples.size(); ++i)
        {
            img[i] = d.samples[i] / static_cast<double>(d.maxval);
        }
        return img;
    }

    /// Label masks as 8-bit PGM with label values stored verbatim.
    inline void save_mask(const fs::path& path, const LabelMask& mask)
    {
        const auto& e = mask.extents;
        if (e.dim != 2)
        {
            throw std::invalid_argument("save_mask: PGM holds 2D masks only");
        }
        std::string out = "P5\n" + std::to_string(e.n[1]) + " " + std::to_string(e.n[0]) + "\n255\n";
        out.append(reinterpret_cast<const char*>(mask.labels.data()), mask.labels.size());
        detail::write_file(path, out);
    }

    inline LabelMask load_mask(const fs::path& path)
    {
        const auto d = read_pgm(path);
        if (d.maxval > 255)
        {
            throw FormatError(path.string() + ": label masks must be 8-bit");
        }
        LabelMask m(d.extents);
        std::copy(d.samples.begin(), d.samples.end(), m.labels.begin());
        return m;
    }

    /// Image by extension: .pgm or SPIM otherwise.
    inline SpatialImage load_any_image(const fs::path& path)
    {
        return path.extension() == ".pgm" ? load_pgm(path) : load_image(path);
    }

    // ---- BLFF: band-limited vector spectra ---------------------------------

    inline json spec_json(const BandSpec& s)
    {
        return {{"dim", s.dim}, {"band", detail::sizes_json(s.band_extents())},
                {"grid", detail::sizes_json(s.grid_extents())}};
    }

    inline void save_field(const fs::path& path, const FreqVectorField& v)
    {
        const auto& s = v.spec();
        detail::Writer w("BLFF");
        w.u32(format_version);
        w.u32(s.dim);
        for (int k = 0; k < s.dim; ++k)
        {
            w.u32(s.band[k]);
        }
        for (int k = 0; k < s.dim; ++k)
        {
            w.u32(s.grid[k]);
        }
        for (int j = 0; j < v.dim(); ++j)
        {
            w.cplxs(v[j].coeffs());
        }
        detail::write_file(path, w.bytes());
        json side = spec_json(s);
        side["magic"] = "BLFF";
        side["version"] = format_version;
        side["components"] = v.dim();
        side["layout"] = "component-major; row-major centered band order; interleaved re,im f64";
        write_json(sidecar_path(path), side);
    }

    inline FreqVectorField load_field(const fs::path& path)
    {
        detail::Reader r(detail::read_file(path), path.string());
        r.expect_magic("BLFF");
        r.check_version();
        const int d = r.dim();
        const auto band = r.sizes(d);
        const auto grid = r.sizes(d);
        BandSpec spec;
        try
        {
            spec = BandSpec(d, band, grid);
        }
        catch (const std::invalid_argument& e)
        {
            throw FormatError(r.name() + ": " + e.what());
        }
        FreqVectorField v(spec);
        for (int j = 0; j < d; ++j)
        {
            r.cplxs(v[j].coeffs());
        }
        r.expect_end();
        return v;
    }

    // ---- SPDF: spatial displacement fields ---------------------------------

    inline void save_deformation(const fs::path& path, const DeformationField& psi)
    {
        const auto& e = psi.extents();
        detail::Writer w("SPDF");
        w.u32(format_version);
        w.u32(e.dim);
        for (int k = 0; k < e.dim; ++k)
        {
            w.u32(e.n[k]);
        }
        for (int j = 0; j < psi.dim(); ++j)
        {
            w.f64s(psi.displacement[j].data());
        }
        detail::write_file(path, w.bytes());
        write_json(sidecar_path(path), {{"magic", "SPDF"},
                                        {"version", format_version},
                                        {"dim", e.dim},
                                        {"grid", detail::sizes_json(e)},
                                        {"layout", "component-major displacement u (voxels), row-major f64"}});
    }

    inline DeformationField load_deformation(const fs::path& path)
    {
        detail::Reader r(detail::read_file(path), path.string());
        r.expect_magic("SPDF");
        r.check_version();
        const int d = r.dim();
        const Extents e(d, r.sizes(d));
        auto psi = DeformationField::identity(e);
        for (int j = 0; j < d; ++j)
        {
            r.f64s(psi.displacement[j].data());
        }
        r.expect_end();
        return psi;
    }

    // ---- DFW1: dual-network weights ----------------------------------------

    inline json arch_json(const Architecture& a)
    {
        json layers = json::array();
        for (const auto& l : a.layers)
        {
            layers.push_back({{"in", l.in_channels},
                              {"out", l.out_channels},
                              {"kernel", l.kernel},
                              {"stride", l.stride},
                              {"activation", l.activation}});
        }
        return {{"dim", a.dim}, {"layers", layers}};
    }

    inline Architecture arch_from_json(const json& j)
    {
        Architecture a;
        a.dim = j.at("dim").get<int>();
        for (const auto& l : j.at("layers"))
        {
            a.layers.push_back({l.at("in").get<int>(), l.at("out").get<int>(), l.value("kernel", 3),
                                l.value("stride", 1), l.value("activation", true)});
        }
        a.validate();
        return a;
    }

    inline void save_weights(const fs::path& path, const DualNetWeights& w, const json& metadata = json::object())
    {
        detail::Writer out("DFW1");
        out.u32(format_version);
        out.u32(w.tie_weights ? 1 : 0);
        out.u32(w.arch.dim);
        out.u32(static_cast<std::uint32_t>(w.arch.layers.size()));
        for (const auto& l : w.arch.layers)
        {
            out.u32(l.in_channels);
            out.u32(l.out_channels);
            out.u32(l.kernel);
            out.u32(l.stride);
            out.u32(l.activation ? 1 : 0);
        }
        auto write_net = [&](const RealNet& net) {
            for (const auto& l : net)
            {
                out.f64s(l.kernel);
                out.f64s(l.bias);
            }
        };
        write_net(w.r_net);
        if (!w.tie_weights)
        {
            write_net(w.i_net);
        }
        detail::write_file(path, out.bytes());
        json side = {{"magic", "DFW1"},
                     {"version", format_version},
                     {"tie_weights", w.tie_weights},
                     {"arch", arch_json(w.arch)},
                     {"parameters", w.parameter_count()},
                     {"training", metadata}};
        write_json(sidecar_path(path), side);
    }

    inline DualNetWeights load_weights(const fs::path& path)
    {
        detail::Reader r(detail::read_file(path), path.string());
        r.expect_magic("DFW1");
        r.check_version();
        const auto tie = r.u32();
        Architecture arch;
        arch.dim = r.dim();
        const auto nlayers = r.u32();
        if (nlayers == 0 || nlayers > 1024)
        {
            throw FormatError(r.name() + ": implausible layer count");
        }
        for (std::uint32_t p = 0; p < nlayers; ++p)
        {
            LayerSpec l;
            l.in_channels = static_cast<int>(r.u32());
            l.out_channels = static_cast<int>(r.u32());
            l.kernel = static_cast<int>(r.u32());
            l.stride = static_cast<int>(r.u32());
            l.activation = r.u32() != 0;
            if (l.in_channels > 4096 || l.out_channels > 4096 || l.kernel > 31)
            {
                throw FormatError(r.name() + ": implausible layer shape");
            }
            arch.layers.push_back(l);
        }
        try
        {
            arch.validate();
        }
        catch (const std::invalid_argument& e)
        {
            throw FormatError(r.name() + ": " + e.what());
        }
        auto w = DualNetWeights::zeros(arch, tie != 0);
        auto read_net = [&](RealNet& net) {
            for (auto& l : net)
            {
                r.f64s(l.kernel);
                r.f64s(l.bias);
            }
        };
        read_net(w.r_net);
        if (!w.tie_weights)
        {
            read_net(w.i_net);
        }
        r.expect_end();
        return w;
    }

} // namespace bandreg::io
