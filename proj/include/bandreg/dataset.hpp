#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <thread>

#include "bandreg/bulleye.hpp"
#include "bandreg/config.hpp"

namespace bandreg
{
    struct ImagePair
    {
        int id = 0;
        SpatialImage source;
        SpatialImage target;
        LabelMask source_mask; // empty extents when no mask is known
        LabelMask target_mask;
    };

    struct LabelDiagnostics
    {
        double initial_ssd = 0.0;
        double final_ssd = 0.0;
        double min_detjac = 1.0;
        int iterations = 0;
        bool backtracking_exhausted = false;
        double wall_ms = 0.0;
    };

    struct LabeledPair
    {
        ImagePair images;
        FreqVectorField v_opt;
        LabelDiagnostics diag;
    };

    /// Indices into Dataset::pairs.
    struct DatasetSplit
    {
        std::vector<int> train;
        std::vector<int> val;
        std::vector<int> test;
    };

    struct Rejection
    {
        int id;
        std::string reason;
    };

    struct Dataset
    {
        RegConfig reg;
        std::vector<LabeledPair> pairs;
        DatasetSplit split;
        std::vector<Rejection> rejected;
        io::json provenance = io::json::object();

        TrainingExample example(std::size_t i) const
        {
            const auto spec = pairs[i].v_opt.spec();
            const auto& p = pairs[i].images;
            return {spatial_to_band(p.source, spec), spatial_to_band(p.target, spec), pairs[i].v_opt};
        }

        std::vector<TrainingExample> examples(const std::vector<int>& idx) const
        {
            std::vector<TrainingExample> out;
            out.reserve(idx.size());
            for (int i : idx)
            {
                out.push_back(example(i));
            }
            return out;
        }
    };

    /// Seeded permutation of 0..n-1 cut into test, validation and training parts.
    inline DatasetSplit make_split(std::size_t n, std::uint64_t seed, std::size_t n_val, std::size_t n_test)
    {
        if (n_val + n_test > n)
        {
            throw std::invalid_argument("make_split: validation + test sizes exceed the dataset");
        }
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(seed ^ 0xd1b54a32d192ed03ULL);
        std::shuffle(idx.begin(), idx.end(), rng);
        DatasetSplit s;
        s.test.assign(idx.begin(), idx.begin() + n_test);
        s.val.assign(idx.begin() + n_test, idx.begin() + n_test + n_val);
        s.train.assign(idx.begin() + n_test + n_val, idx.end());
        for (auto* part : {&s.train, &s.val, &s.test})
        {
            std::sort(part->begin(), part->end());
        }
        return s;
    }

    /// 10% validation, 20% test.
    inline DatasetSplit make_split(std::size_t n, std::uint64_t seed)
    {
        return make_split(n, seed, n / 10, n / 5);
    }

    using Logger = std::function<void(const std::string&)>;

    /// Registers every pair (workers threads, results in input order). Pairs that
    /// diverge or fold (min DetJac <= 0) are excluded and reported.
    inline Dataset make_labels(const std::vector<ImagePair>& pairs, const RegConfig& cfg, int workers = 1,
                               const Logger& log = {})
    {
        cfg.validate();
        workers = std::max(1, workers);
        std::vector<std::optional<LabeledPair>> done(pairs.size());
        std::vector<std::string> failure(pairs.size());
        std::atomic<std::size_t> next{0};
        auto work = [&] {
            for (std::size_t i = next++; i < pairs.size(); i = next++)
            {
                const auto& p = pairs[i];
                try
                {
                    const auto t0 = std::chrono::steady_clock::now();
                    auto r = register_pair(p.source, p.target, cfg);
                    const double ms =
                        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                    if (!(r.min_detjac > 0.0))
                    {
                        failure[i] = "min DetJac " + std::to_string(r.min_detjac) + " <= 0";
                        continue;
                    }
                    done[i] = LabeledPair{p, std::move(r.v_opt),
                                          {r.initial_ssd, r.final_ssd, r.min_detjac, r.iterations,
                                           r.backtracking_exhausted, ms}};
                }
                catch (const DivergedError& e)
                {
                    failure[i] = std::string("diverged: ") + e.what();
                }
            }
        };
        if (workers == 1)
        {
            work();
        }
        else
        {
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w)
            {
                pool.emplace_back(work);
            }
            for (auto& t : pool)
            {
                t.join();
            }
        }
        Dataset ds;
        ds.reg = cfg;
        for (std::size_t i = 0; i < pairs.size(); ++i)
        {
            if (done[i])
            {
                ds.pairs.push_back(std::move(*done[i]));
            }
            else
            {
                ds.rejected.push_back({pairs[i].id, failure[i]});
                if (log)
                {
                    log("pair " + std::to_string(pairs[i].id) + " excluded: " + failure[i]);
                }
            }
        }
        ds.split = make_split(ds.pairs.size(), cfg.seed);
        ds.provenance = {{"reg_config", io::to_json(cfg)},
                         {"split_seed", cfg.seed},
                         {"pairs_in", pairs.size()},
                         {"pairs_accepted", ds.pairs.size()}};
        return ds;
    }

    /// Bull-eye images paired by pair_indices.
    inline std::vector<ImagePair> bulleye_pairs(const std::vector<BullEyeImage>& pool, std::uint64_t seed)
    {
        std::vector<ImagePair> out;
        int id = 0;
        for (const auto& [a, b] : pair_indices(static_cast<int>(pool.size()), seed))
        {
            out.push_back({id++, pool[a].image, pool[b].image, pool[a].mask, pool[b].mask});
        }
        return out;
    }

} // namespace bandreg

namespace bandreg::io
{
    namespace detail
    {
        inline std::string numbered(const char* stem, int i, const char* suffix)
        {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s_%04d%s", stem, i, suffix);
            return buf;
        }

        /// Resolves a manifest entry and verifies its checksum.
        inline fs::path checked(const fs::path& dir, const json& entry, const std::string& key)
        {
            const auto rel = entry.at(key).get<std::string>();
            const auto path = dir / rel;
            if (!fs::exists(path))
            {
                throw IoError("missing file referenced by manifest: " + path.string());
            }
            if (auto it = entry.find("checksums"); it != entry.end() && it->contains(rel))
            {
                if (file_checksum(path) != it->at(rel).get<std::string>())
                {
                    throw FormatError("checksum mismatch: " + path.string());
                }
            }
            return path;
        }

        inline json params_json(const BullEyeParams& p)
        {
            return {{"a_in", p.a_in}, {"b_in", p.b_in}, {"a_out", p.a_out}, {"b_out", p.b_out}};
        }

        inline json manifest_of(const fs::path& dir, const char* what)
        {
            const auto path = dir / "manifest.json";
            if (!fs::exists(path))
            {
                throw IoError(std::string(what) + ": missing file " + path.string());
            }
            return read_json(path);
        }
    } // namespace detail

    /// Writes a bull-eye corpus: SPIM + PGM per image, a mask per image and a
    /// manifest with the generation parameters and the source/target pairing.
    inline json save_corpus(const fs::path& dir, const std::vector<BullEyeImage>& pool, std::uint64_t seed,
                            int grid)
    {
        json images = json::array();
        for (int i = 0; i < static_cast<int>(pool.size()); ++i)
        {
            const auto spim = "images/" + detail::numbered("bulleye", i, ".spim");
            const auto pgm = "images/" + detail::numbered("bulleye", i, ".pgm");
            const auto mask = "masks/" + detail::numbered("bulleye", i, "_mask.pgm");
            save_image(dir / spim, pool[i].image);
            save_pgm(dir / pgm, pool[i].image);
            save_mask(dir / mask, pool[i].mask);
            images.push_back({{"id", i},
                              {"image", spim},
                              {"preview", pgm},
                              {"mask", mask},
                              {"params", detail::params_json(pool[i].params)},
                              {"checksums", {{spim, file_checksum(dir / spim)}, {mask, file_checksum(dir / mask)}}}});
        }
        json pairs = json::array();
        for (const auto& [a, b] : pair_indices(static_cast<int>(pool.size()), seed))
        {
            pairs.push_back({a, b});
        }
        json m = {{"kind", "bulleye-corpus"},
                  {"version", format_version},
                  {"images", images},
                  {"pairs", pairs},
                  {"provenance", {{"seed", seed}, {"n", pool.size()}, {"grid", grid}}}};
        return m;
    }

    /// Source/target pairs listed by a corpus manifest.
    inline std::vector<ImagePair> load_pairs(const fs::path& manifest_path)
    {
        if (!fs::exists(manifest_path))
        {
            throw IoError("missing file " + manifest_path.string());
        }
        const auto m = read_json(manifest_path);
        const auto dir = manifest_path.parent_path();
        try
        {
            const auto& images = m.at("images");
            std::vector<ImagePair> out;
            int id = 0;
            for (const auto& pr : m.at("pairs"))
            {
                const auto& a = images.at(pr.at(0).get<std::size_t>());
                const auto& b = images.at(pr.at(1).get<std::size_t>());
                ImagePair p;
                p.id = id++;
                p.source = load_any_image(detail::checked(dir, a, "image"));
                p.target = load_any_image(detail::checked(dir, b, "image"));
                if (a.contains("mask") && b.contains("mask"))
                {
                    p.source_mask = load_mask(detail::checked(dir, a, "mask"));
                    p.target_mask = load_mask(detail::checked(dir, b, "mask"));
                }
                out.push_back(std::move(p));
            }
            return out;
        }
        catch (const json::exception& e)
        {
            throw FormatError(manifest_path.string() + ": " + e.what());
        }
    }

    inline json diagnostics_json(const LabelDiagnostics& d)
    {
        return {{"initial_ssd", d.initial_ssd},   {"final_ssd", d.final_ssd},
                {"min_detjac", d.min_detjac},     {"iterations", d.iterations},
                {"backtracking_exhausted", d.backtracking_exhausted}, {"wall_ms", d.wall_ms}};
    }

    inline void save_dataset(const fs::path& dir, const Dataset& ds)
    {
        json examples = json::array();
        for (const auto& lp : ds.pairs)
        {
            const int id = lp.images.id;
            const auto src = "images/" + detail::numbered("pair", id, "_source.spim");
            const auto tgt = "images/" + detail::numbered("pair", id, "_target.spim");
            const auto lbl = "labels/" + detail::numbered("pair", id, ".blff");
            save_image(dir / src, lp.images.source);
            save_image(dir / tgt, lp.images.target);
            save_field(dir / lbl, lp.v_opt);
            json e = {{"id", id},
                      {"source", src},
                      {"target", tgt},
                      {"label", lbl},
                      {"diagnostics", diagnostics_json(lp.diag)}};
            json sums = {{src, file_checksum(dir / src)}, {tgt, file_checksum(dir / tgt)},
                         {lbl, file_checksum(dir / lbl)}};
            if (lp.images.source_mask.labels.size() == lp.images.source.size() &&
                lp.images.target_mask.labels.size() == lp.images.target.size())
            {
                const auto sm = "masks/" + detail::numbered("pair", id, "_source_mask.pgm");
                const auto tm = "masks/" + detail::numbered("pair", id, "_target_mask.pgm");
                save_mask(dir / sm, lp.images.source_mask);
                save_mask(dir / tm, lp.images.target_mask);
                e["source_mask"] = sm;
                e["target_mask"] = tm;
                sums[sm] = file_checksum(dir / sm);
                sums[tm] = file_checksum(dir / tm);
            }
            e["checksums"] = sums;
            examples.push_back(e);
        }
        json rejected = json::array();
        for (const auto& r : ds.rejected)
        {
            rejected.push_back({{"id", r.id}, {"reason", r.reason}});
        }
        json prov = ds.provenance;
        prov["reg_config"] = to_json(ds.reg);
        prov["rejected"] = rejected;
        write_json(dir / "manifest.json",
                   {{"kind", "bandreg-dataset"},
                    {"version", format_version},
                    {"examples", examples},
                    {"split", {{"train", ds.split.train}, {"val", ds.split.val}, {"test", ds.split.test}}},
                    {"provenance", prov}});
    }

    inline Dataset load_dataset(const fs::path& dir)
    {
        const auto m = detail::manifest_of(dir, "load_dataset");
        try
        {
            Dataset ds;
            ds.provenance = m.at("provenance");
            ds.reg = reg_config_from_json(ds.provenance.at("reg_config"));
            for (const auto& e : m.at("examples"))
            {
                LabeledPair lp;
                lp.images.id = e.at("id").get<int>();
                lp.images.source = load_image(detail::checked(dir, e, "source"));
                lp.images.target = load_image(detail::checked(dir, e, "target"));
                lp.v_opt = load_field(detail::checked(dir, e, "label"));
                if (e.contains("source_mask"))
                {
                    lp.images.source_mask = load_mask(detail::checked(dir, e, "source_mask"));
                    lp.images.target_mask = load_mask(detail::checked(dir, e, "target_mask"));
                }
                const auto& d = e.at("diagnostics");
                lp.diag = {d.at("initial_ssd").get<double>(),  d.at("final_ssd").get<double>(),
                           d.at("min_detjac").get<double>(),   d.at("iterations").get<int>(),
                           d.at("backtracking_exhausted").get<bool>(), d.at("wall_ms").get<double>()};
                ds.pairs.push_back(std::move(lp));
            }
            const auto& s = m.at("split");
            ds.split = {s.at("train").get<std::vector<int>>(), s.at("val").get<std::vector<int>>(),
                        s.at("test").get<std::vector<int>>()};
            for (const auto* part : {&ds.split.train, &ds.split.val, &ds.split.test})
            {
                for (int i : *part)
                {
                    if (i < 0 || i >= static_cast<int>(ds.pairs.size()))
                    {
                        throw FormatError(dir.string() + ": split index out of range");
                    }
                }
            }
            for (const auto& r : ds.provenance.value("rejected", json::array()))
            {
                ds.rejected.push_back({r.at("id").get<int>(), r.at("reason").get<std::string>()});
            }
            return ds;
        }
        catch (const json::exception& e)
        {
            throw FormatError(dir.string() + "/manifest.json: " + e.what());
        }
    }

} // namespace bandreg::io
