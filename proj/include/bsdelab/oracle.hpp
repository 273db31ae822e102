#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "bsdelab/core_model.hpp"

namespace bsdelab {

// Reference values y^i(t, x) for one-dimensional problems, computed without
// any of the Monte Carlo machinery.

struct PdeGridSpec {
    double half_width = 20.0;
    std::size_t space_cells = 2000;
    std::size_t time_steps = 2000;
};

// Values of every component on a uniform space grid at requested times.
struct ReferenceSolution {
    std::vector<double> x;
    std::vector<double> t;
    std::size_t components = 1;
    // values[(c * t.size() + s) * x.size() + j]
    std::vector<double> values;

    double at(std::size_t c, std::size_t s, std::size_t j) const {
        return values[(c * t.size() + s) * x.size() + j];
    }
    // Linear interpolation in x at a stored time; linear in t between stored times.
    double value(std::size_t c, double t, double x) const;
};

// Solves u_t + 0.5 sigma^2 u_xx + H_i(t, x, u, sigma u_x) = 0, u(T) = g^i on
// [-L, L] with reflecting boundaries. IMEX Euler: implicit diffusion, explicit
// nonlinearity with centered u_x. Requires m = 1. `times` must lie in [0, T].
ReferenceSolution solve_semilinear_pde(const ProblemSpec& problem, const PdeGridSpec& grid,
                                       const std::vector<double>& times);

// Lattice file: header "t,x,component,y", one row per lattice point.
void write_reference(const ReferenceSolution& ref, const std::filesystem::path& file);
ReferenceSolution read_reference(const std::filesystem::path& file);

// Closed-form or ODE references for catalogue scenarios where they exist;
// throws std::invalid_argument otherwise.
double closed_form_y(const std::string& scenario, double T, double t, double x, std::size_t component);
double closed_form_z(const std::string& scenario, double T, double t, double x, std::size_t component);
ReferenceSolution tabulate_closed_form(const std::string& scenario, double T, const std::vector<double>& times,
                                       const std::vector<double>& xs, std::size_t components);

}  // namespace bsdelab
