#pragma once

#include <span>

#include "bsdelab/core_model.hpp"

namespace bsdelab {

// Backward driver evaluated for all components at once: out[i] = H_i(t, x, w).
class Driver {
public:
    virtual ~Driver() = default;
    virtual ArgLayout layout() const = 0;
    virtual void evaluate(double t, std::span<const double> x, std::span<const double> w,
                          std::span<double> out) const = 0;
};

// The generator as given, without mollification. Only meaningful for the
// solver when the caller asserts it is Lipschitz in w.
class RawDriver final : public Driver {
public:
    explicit RawDriver(const GeneratorSpec& gen) : gen_(gen) {}

    ArgLayout layout() const override { return gen_.layout(); }
    void evaluate(double t, std::span<const double> x, std::span<const double> w,
                  std::span<double> out) const override {
        for (std::size_t i = 0; i < gen_.n_components; ++i) out[i] = gen_.evaluate(t, x, w, i);
    }

private:
    const GeneratorSpec& gen_;
};

}  // namespace bsdelab
