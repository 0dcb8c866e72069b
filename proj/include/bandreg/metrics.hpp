#pragma once

#include <chrono>
#include <map>
#include <sstream>

#include "bandreg/dataset.hpp"

namespace bandreg
{
    struct DiceReport
    {
        std::map<int, double> per_label;
        double mean = 0.0;
        std::vector<std::string> notes; // labels skipped because neither mask has them
    };

    /// Per-label 2|A n B| / (|A| + |B|) over the non-zero labels.
    inline DiceReport dice(const LabelMask& a, const LabelMask& b)
    {
        if (!(a.extents == b.extents) || a.labels.size() != b.labels.size())
        {
            throw SpecMismatch("dice: masks differ in shape");
        }
        std::array<std::size_t, 256> na{}, nb{}, both{};
        for (std::size_t i = 0; i < a.labels.size(); ++i)
        {
            ++na[a.labels[i]];
            ++nb[b.labels[i]];
            if (a.labels[i] == b.labels[i])
            {
                ++both[a.labels[i]];
            }
        }
        DiceReport r;
        for (int l = 1; l < 256; ++l)
        {
            if (na[l] + nb[l] == 0)
            {
                continue;
            }
            r.per_label[l] = 2.0 * static_cast<double>(both[l]) / static_cast<double>(na[l] + nb[l]);
        }
        if (r.per_label.empty())
        {
            r.notes.push_back("no foreground label present in either mask");
            return r;
        }
        for (const auto& [l, s] : r.per_label)
        {
            r.mean += s;
        }
        r.mean /= static_cast<double>(r.per_label.size());
        return r;
    }

    /// Dice restricted to the given labels; labels absent from both masks are
    /// skipped with a note.
    inline DiceReport dice(const LabelMask& a, const LabelMask& b, const std::vector<int>& labels)
    {
        const auto all = dice(a, b);
        DiceReport r;
        for (int l : labels)
        {
            if (auto it = all.per_label.find(l); it != all.per_label.end())
            {
                r.per_label[l] = it->second;
                r.mean += it->second;
            }
            else
            {
                r.notes.push_back("label " + std::to_string(l) + " absent from both masks");
            }
        }
        if (!r.per_label.empty())
        {
            r.mean /= static_cast<double>(r.per_label.size());
        }
        return r;
    }

    struct CostModel
    {
        struct Layer
        {
            int b_prev;
            int b;
            int h;
            std::size_t out_positions;
            double cost; // b_prev * h^d * b * out_positions
        };
        std::vector<Layer> layers;
        double total = 0.0;
    };

    struct LayerCostReport
    {
        CostModel full;
        CostModel band;
        double ratio = 0.0; // full / band
    };

    /// Multiply-accumulate count of a conv stack on a lattice of the given size;
    /// out_positions counts output elements (not a squared side length).
    inline CostModel conv_cost(const Architecture& arch, const Extents& dims)
    {
        arch.validate();
        if (dims.dim != arch.dim)
        {
            throw SpecMismatch("conv_cost: lattice dimension differs from architecture");
        }
        CostModel m;
        Extents cur = dims;
        for (const auto& l : arch.layers)
        {
            cur = detail::conv_output_extents(cur, l.stride);
            const double c = static_cast<double>(l.in_channels) * static_cast<double>(arch.taps(l)) *
                             static_cast<double>(l.out_channels) * static_cast<double>(cur.size());
            m.layers.push_back({l.in_channels, l.out_channels, l.kernel, cur.size(), c});
            m.total += c;
        }
        return m;
    }

    inline LayerCostReport layer_cost(const Architecture& arch, const Extents& full_dims, const Extents& band_dims)
    {
        LayerCostReport r{conv_cost(arch, full_dims), conv_cost(arch, band_dims), 0.0};
        r.ratio = r.full.total / r.band.total;
        return r;
    }

    inline double median(std::vector<double> v)
    {
        if (v.empty())
        {
            throw std::invalid_argument("median: empty sample");
        }
        const std::size_t mid = v.size() / 2;
        std::nth_element(v.begin(), v.begin() + mid, v.end());
        const double hi = v[mid];
        if (v.size() % 2 == 1)
        {
            return hi;
        }
        return 0.5 * (hi + *std::max_element(v.begin(), v.begin() + mid));
    }

    struct TimingRow
    {
        int pair_id;
        std::string method; // "register" or "predict"
        double wall_ms;
        double final_ssd;
        double min_detjac;
    };

    struct TimingReport
    {
        std::vector<TimingRow> rows;
        std::size_t pair_count = 0;
        std::string config_hash;
        double median_register_ms = 0.0;
        double median_predict_ms = 0.0;

        double speedup() const { return median_register_ms / median_predict_ms; }
    };

    /// Wall-clock of register_pair vs predict on the same pairs, in the calling thread.
    inline TimingReport timing_report(const std::vector<ImagePair>& pairs, const RegConfig& cfg,
                                      const DualNetWeights& weights)
    {
        using clock = std::chrono::steady_clock;
        TimingReport rep;
        rep.pair_count = pairs.size();
        rep.config_hash = io::config_hash(io::to_json(cfg));
        std::vector<double> reg_ms, pred_ms;
        for (const auto& p : pairs)
        {
            auto t0 = clock::now();
            const auto r = register_pair(p.source, p.target, cfg);
            const double a = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            t0 = clock::now();
            const auto q = predict(p.source, p.target, weights, cfg);
            const double b = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
            rep.rows.push_back({p.id, "register", a, r.final_ssd, r.min_detjac});
            rep.rows.push_back({p.id, "predict", b, q.final_ssd, q.min_detjac});
            reg_ms.push_back(a);
            pred_ms.push_back(b);
        }
        if (!pairs.empty())
        {
            rep.median_register_ms = median(reg_ms);
            rep.median_predict_ms = median(pred_ms);
        }
        return rep;
    }

    inline std::string timing_csv(const TimingReport& rep)
    {
        std::ostringstream os;
        os.precision(17);
        os << "pair_id,method,wall_ms,final_ssd,min_detjac\n";
        for (const auto& r : rep.rows)
        {
            os << r.pair_id << ',' << r.method << ',' << r.wall_ms << ',' << r.final_ssd << ',' << r.min_detjac
               << '\n';
        }
        return os.str();
    }

} // namespace bandreg
