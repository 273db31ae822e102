#pragma once

// Frozen output of tests/oracles/compute_oracles (2e6 paths, mt19937_64,
// Boost tanh-sinh / Gauss-Kronrod). Regenerate with
//   build/compute_oracles 2000000
namespace oracle {

inline constexpr double kBumpNormalizer = 0.443993816168084;
inline constexpr double kBumpPeak = 0.828568839869097;
inline constexpr double kBumpAbsMean = 0.334453997709973;
inline constexpr double kMollifiedAbsZn4 = 0.0836134994274932;

// E[max_k |X_k|^2], X_0 = 0, T = 1, Euler with N steps.
inline constexpr double kSupSqBrownianN256 = 1.74501659894719;
inline constexpr double kSupSqBrownianN256Se = 0.00111;
inline constexpr double kSupSqBoundedN256 = 3.00220558867996;
inline constexpr double kSupSqBoundedN256Se = 0.00146;
inline constexpr double kSupSqBrownianN4096 = 1.81175561125196;
inline constexpr double kSupSqBoundedN4096 = 3.09274122824214;

// E[max_k exp(-2 (1 - t_k)) B_{t_k}^2] on 50 steps.
inline constexpr double kLinearYMomentN50 = 1.26535560199701;
inline constexpr double kLinearYMomentN50Se = 0.001;

// (int_{t+delta}^{1} int_{-3}^{3} p_{s-t}(y)^2 / p_s(y) dy ds)^(1/2), t = 0.5.
inline constexpr double kGaussianL2Delta04 = 0.343065474825418;
inline constexpr double kGaussianL2Delta02 = 0.613292302858314;
inline constexpr double kGaussianL2Delta01 = 0.731001312082509;

}  // namespace oracle
