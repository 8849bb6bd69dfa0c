#pragma once

#include <cmath>
#include <functional>

#include "tensor.hpp"

namespace xnet {

// Central-finite-difference check of an analytic gradient, always in 64-bit.
// scalar_fn must re-evaluate the scalar objective from the current contents
// of param; analytic is the gradient under test. Returns the max over
// elements of |analytic - fd| / max(1, |analytic|).
inline double grad_check(const std::function<double()>& scalar_fn, Tensor<double>& param,
                         const Tensor<double>& analytic, double eps = 1e-5) {
    check_same_shape(param, analytic, "grad_check");
    double worst = 0.0;
    for (std::size_t i = 0; i < param.numel(); ++i) {
        const double saved = param[i];
        param[i] = saved + eps;
        double fp = scalar_fn();
        param[i] = saved - eps;
        double fm = scalar_fn();
        param[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: objective is non-finite");
        double fd = (fp - fm) / (2.0 * eps);
        double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace xnet
