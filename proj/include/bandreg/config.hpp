#pragma once

#include <set>
#include <string>

#include "bandreg/io.hpp"

namespace bandreg::io
{
    namespace detail
    {
        inline void reject_unknown(const json& j, const std::set<std::string>& known, const char* what)
        {
            if (!j.is_object())
            {
                throw std::invalid_argument(std::string(what) + ": expected a JSON object");
            }
            for (const auto& [key, value] : j.items())
            {
                if (!known.count(key))
                {
                    throw std::invalid_argument(std::string(what) + ": unknown key '" + key + "'");
                }
            }
        }

        template <class T>
        void read_opt(const json& j, const char* key, T& out)
        {
            if (auto it = j.find(key); it != j.end())
            {
                try
                {
                    out = it->get<T>();
                }
                catch (const json::exception&)
                {
                    throw std::invalid_argument(std::string("config key '") + key + "' has the wrong type");
                }
            }
        }
    } // namespace detail

    inline json to_json(const RegConfig& c)
    {
        return {{"gamma", c.gamma},       {"alpha", c.alpha},         {"power", c.power},
                {"dim", c.dim},           {"band", c.band},           {"grid", c.grid},
                {"steps", c.steps},       {"max_iters", c.max_iters}, {"step_size", c.step_size},
                {"tol", c.tol},           {"fd_eps", c.fd_eps},       {"reject_folding", c.reject_folding},
                {"seed", c.seed}};
    }

    /// Missing keys keep the values already in `base`.
    inline RegConfig reg_config_from_json(const json& j, RegConfig base = {})
    {
        detail::reject_unknown(j,
                               {"gamma", "alpha", "power", "dim", "band", "grid", "steps", "max_iters", "step_size",
                                "tol", "fd_eps", "reject_folding", "seed"},
                               "registration config");
        detail::read_opt(j, "gamma", base.gamma);
        detail::read_opt(j, "alpha", base.alpha);
        detail::read_opt(j, "power", base.power);
        detail::read_opt(j, "dim", base.dim);
        detail::read_opt(j, "band", base.band);
        detail::read_opt(j, "grid", base.grid);
        detail::read_opt(j, "steps", base.steps);
        detail::read_opt(j, "max_iters", base.max_iters);
        detail::read_opt(j, "step_size", base.step_size);
        detail::read_opt(j, "tol", base.tol);
        detail::read_opt(j, "fd_eps", base.fd_eps);
        detail::read_opt(j, "reject_folding", base.reject_folding);
        detail::read_opt(j, "seed", base.seed);
        base.validate();
        return base;
    }

    inline json to_json(const TrainConfig& c)
    {
        return {{"lambda", c.lambda},
                {"lr", c.lr},
                {"batch", c.batch},
                {"epochs", c.epochs},
                {"seed", c.seed},
                {"optimizer", c.momentum ? "momentum" : "sgd"},
                {"momentum", c.momentum_coeff},
                {"tie_weights", c.tie_weights},
                {"arch", arch_json(c.arch)}};
    }

    inline TrainConfig train_config_from_json(const json& j, TrainConfig base = {})
    {
        detail::reject_unknown(
            j, {"lambda", "lr", "batch", "epochs", "seed", "optimizer", "momentum", "tie_weights", "arch"},
            "training config");
        detail::read_opt(j, "lambda", base.lambda);
        detail::read_opt(j, "lr", base.lr);
        detail::read_opt(j, "batch", base.batch);
        detail::read_opt(j, "epochs", base.epochs);
        detail::read_opt(j, "seed", base.seed);
        detail::read_opt(j, "momentum", base.momentum_coeff);
        detail::read_opt(j, "tie_weights", base.tie_weights);
        if (auto it = j.find("optimizer"); it != j.end())
        {
            const auto name = it->get<std::string>();
            if (name != "sgd" && name != "momentum")
            {
                throw std::invalid_argument("training config: optimizer must be 'sgd' or 'momentum'");
            }
            base.momentum = name == "momentum";
        }
        if (auto it = j.find("arch"); it != j.end())
        {
            base.arch = arch_from_json(*it);
        }
        base.validate();
        return base;
    }

    /// Stable short hash of a JSON document (keys are kept sorted).
    inline std::string config_hash(const json& j) { return text_checksum(j.dump()); }

} // namespace bandreg::io
