// dissipative.hpp: Lindblad integration and quantum-jump (MCWF) trajectories
//
// Rates are bare: a collapse {o, rate} contributes rate * (2 o rho o^dag - o^dag o rho - rho o^dag o),
// i.e. a jump operator sqrt(2 rate) o.

#pragma once

#include "cavlink/propagator.hpp"

#include <cstdint>
#include <ostream>
#include <random>
#include <thread>

namespace cavlink::dissipative {

using hilbert::DensityMatrix;
using hilbert::HilbertLayout;
using hilbert::StateVector;
using propagator::tolerance_error;
using propagator::TopOccupation;

struct Collapse {
    SpMat op;
    double rate = 0.0;
    std::string label;
};

class CollapseSet {
public:
    CollapseSet() = default;
    explicit CollapseSet(HilbertLayout layout) : layout_(std::move(layout)) {}

    void add(const hilbert::SparseOperator& op, double rate, std::string label) {
        if (!(op.layout == layout_)) throw std::invalid_argument("CollapseSet: layout mismatch for '" + label + "'");
        if (!(rate >= 0.0) || !std::isfinite(rate))
            throw std::invalid_argument("CollapseSet: rate of '" + label + "' must be finite and >= 0");
        if (rate == 0.0) return;
        items_.push_back({op.matrix, rate, std::move(label)});
    }

    const HilbertLayout& layout() const { return layout_; }
    const std::vector<Collapse>& items() const { return items_; }
    bool empty() const { return items_.empty(); }
    std::size_t size() const { return items_.size(); }

    // sum_k rate_k o_k^dag o_k
    SpMat decay_operator() const {
        const auto n = static_cast<Eigen::Index>(layout_.total_dim());
        SpMat k(n, n);
        for (const auto& c : items_) k += c.rate * SpMat(SpMat(c.op.adjoint()) * c.op);
        return k;
    }

private:
    HilbertLayout layout_;
    std::vector<Collapse> items_;
};

// H - i sum rate o^dag o
inline TimeDependentOperator non_hermitian_drift(const TimeDependentOperator& h, const CollapseSet& c) {
    TimeDependentOperator out = h;
    if (!c.empty()) out.add(-I, 0.0, c.decay_operator());
    return out;
}

// ---------------------------------------------------------------- Lindblad

struct LindbladOptions {
    double dt = 0.0;  // 0: default step
    std::size_t samples = 2;
    double trace_tolerance = 1e-7;
    double positivity_tolerance = 1e-7;
    double top_fock_tolerance = 1e-4;
    bool monitor_cutoff = true;
    std::function<void(double, const Mat&)> observer;
};

struct LindbladResult {
    DensityMatrix rho;
    double trace_drift = 0.0;
    double min_eigenvalue = 0.0;
    TopOccupation max_top_fock;
    std::size_t steps = 0;
    double dt = 0.0;
};

namespace detail {

struct LindbladRhs {
    const TimeDependentOperator& h;
    SpMat K;  // sum rate o^dag o
    std::vector<std::pair<SpMat, double>> jumps;
    Mat hr, x;

    void operator()(double t, const Mat& rho, Mat& out) {
        h.apply(t, rho, hr);
        // -i[H, rho] with rho H = (H rho)^dag
        out = -I * (hr - hr.adjoint());
        if (K.nonZeros() > 0) {
            hr = K * rho;
            out -= hr + hr.adjoint();
        }
        for (const auto& [o, rate] : jumps) {
            x = o * rho;
            hr = o * x.adjoint();
            out += (2.0 * rate) * hr.adjoint();
        }
    }
};

}  // namespace detail

inline LindbladResult lindblad_evolve(const DensityMatrix& rho0, const TimeDependentOperator& h, const CollapseSet& c,
                                      double t0, double t1, const LindbladOptions& opt = {}) {
    const HilbertLayout& l = rho0.layout;
    if (!(h.layout() == l)) throw std::invalid_argument("lindblad_evolve: Hamiltonian layout mismatch");
    if (!c.empty() && !(c.layout() == l)) throw std::invalid_argument("lindblad_evolve: collapse layout mismatch");
    if (opt.dt < 0.0) throw std::invalid_argument("lindblad_evolve: dt must be > 0");
    if (max_abs(Mat(rho0.matrix - rho0.matrix.adjoint())) > 1e-10)
        throw std::invalid_argument("lindblad_evolve: rho0 not Hermitian");
    if (std::abs(rho0.trace() - 1.0) > 1e-10) throw std::invalid_argument("lindblad_evolve: rho0 trace != 1");
    if (rho0.min_eigenvalue() < -1e-10) throw std::invalid_argument("lindblad_evolve: rho0 not positive");

    double dt_max = opt.dt;
    if (dt_max == 0.0) {
        double rate = h.max_rate();
        for (const auto& k : c.items()) rate += 2.0 * k.rate * std::pow(max_abs(k.op), 2) * 4.0;
        dt_max = rate > 0.0 ? 2.0 * pi / (50.0 * rate) : 1.0;
    }
    const propagator::TimeGrid grid = propagator::make_grid(t0, t1, dt_max, opt.samples);

    detail::LindbladRhs rhs{h, c.decay_operator(), {}, {}, {}};
    for (const auto& k : c.items()) rhs.jumps.emplace_back(k.op, k.rate);

    LindbladResult res;
    res.dt = grid.dt;
    res.steps = grid.steps;
    res.min_eigenvalue = 1.0;
    Mat rho = rho0.matrix, k1, k2, k3, k4, tmp;
    auto check = [&](double t, bool spectral) {
        const double drift = std::abs(rho.trace() - 1.0);
        res.trace_drift = std::max(res.trace_drift, drift);
        if (drift > opt.trace_tolerance) {
            std::ostringstream os;
            os << "trace drift " << drift << " exceeds " << opt.trace_tolerance << " at t=" << t << " (dt=" << grid.dt
               << ")";
            throw tolerance_error("dissipative", os.str());
        }
        if (spectral) {
            const double m = hermitian_eigenvalues(0.5 * (rho + rho.adjoint())).minCoeff();
            res.min_eigenvalue = std::min(res.min_eigenvalue, m);
            if (m < -opt.positivity_tolerance) {
                std::ostringstream os;
                os << "density matrix eigenvalue " << m << " below -" << opt.positivity_tolerance << " at t=" << t;
                throw tolerance_error("dissipative", os.str());
            }
        }
        if (opt.monitor_cutoff) {
            const TopOccupation top = propagator::top_fock_occupation(l, rho);
            if (top.value > res.max_top_fock.value) res.max_top_fock = top;
            if (top.value > opt.top_fock_tolerance) {
                std::ostringstream os;
                os << "top Fock occupation " << top.value << " of mode '" << top.label << "' exceeds "
                   << opt.top_fock_tolerance << " at t=" << t << "; raise the cutoff";
                throw tolerance_error("dissipative", os.str());
            }
        }
    };
    check(t0, true);
    if (opt.observer) opt.observer(t0, rho);
    for (std::size_t step = 0; step < grid.steps; ++step) {
        const double t = grid.time(step), dt = grid.dt;
        rhs(t, rho, k1);
        tmp = rho + (0.5 * dt) * k1;
        rhs(t + 0.5 * dt, tmp, k2);
        tmp = rho + (0.5 * dt) * k2;
        rhs(t + 0.5 * dt, tmp, k3);
        tmp = rho + dt * k3;
        rhs(t + dt, tmp, k4);
        rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const bool sample = (step + 1) % grid.steps_per_sample == 0;
        if (sample) check(grid.time(step + 1), true);
        if (opt.observer && sample) opt.observer(grid.time(step + 1), rho);
    }
    res.rho = DensityMatrix(l, 0.5 * (rho + rho.adjoint()));
    return res;
}

// ---------------------------------------------------------------- random streams

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Seed of trajectory i in an ensemble; depends only on (base_seed, i).
inline std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t i) {
    return splitmix64(splitmix64(base_seed) ^ splitmix64(i + 0x632BE59BD9B4E019ull));
}

// Uniform in [0, 1) from the top 53 bits; platform independent unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

// ---------------------------------------------------------------- trajectories

struct JumpRecord {
    double time;
    std::size_t channel;
    std::string label;
};

// Maps a normalized state to one row of recorded numbers.
using Sampler = std::function<std::vector<double>(double, const StateVector&)>;

struct TrajectoryOptions {
    double dt = 0.0;  // 0: default step of the non-Hermitian drift
    std::size_t samples = 2;
    double max_jump_probability = 0.1;
    double top_fock_tolerance = 1e-4;
    bool monitor_cutoff = true;
    Sampler sampler;
};

struct TrajectoryResult {
    std::vector<double> times;
    std::vector<std::vector<double>> series;  // one row per sample time
    std::vector<JumpRecord> jumps;
    std::uint64_t seed = 0;
    StateVector final_state;
    TopOccupation max_top_fock;
    double max_step_jump_probability = 0.0;
    double dt = 0.0;
};

// Shared, read-only pieces of a trajectory run.
struct TrajectoryKernel {
    TimeDependentOperator drift;
    CollapseSet collapses;
    propagator::TimeGrid grid;

    TrajectoryKernel(const TimeDependentOperator& h, const CollapseSet& c, double t0, double t1,
                     const TrajectoryOptions& opt)
        : drift(non_hermitian_drift(h, c)), collapses(c) {
        if (!c.empty() && !(c.layout() == h.layout()))
            throw std::invalid_argument("mcwf: collapse layout mismatch");
        if (opt.dt < 0.0) throw std::invalid_argument("mcwf: dt must be > 0");
        grid = propagator::make_grid(t0, t1, opt.dt > 0.0 ? opt.dt : propagator::default_step(drift), opt.samples);
    }
};

inline TrajectoryResult run_trajectory(const TrajectoryKernel& k, const StateVector& psi0, std::uint64_t seed,
                                       const TrajectoryOptions& opt) {
    const HilbertLayout& l = psi0.layout;
    if (!(k.drift.layout() == l)) throw std::invalid_argument("mcwf: layout mismatch");
    if (std::abs(psi0.norm() - 1.0) > 1e-9) throw std::invalid_argument("mcwf: psi0 not normalized");
    std::mt19937_64 rng(seed);
    const auto& grid = k.grid;
    const auto& items = k.collapses.items();

    TrajectoryResult res;
    res.seed = seed;
    res.dt = grid.dt;
    Vec psi = psi0.amplitudes, before, k1, k2, k3, k4, tmp;
    std::vector<double> weights(items.size());

    auto record = [&](double t) {
        if (opt.monitor_cutoff) {
            const TopOccupation top = propagator::top_fock_occupation(l, psi);
            if (top.value > res.max_top_fock.value) res.max_top_fock = top;
            if (top.value > opt.top_fock_tolerance) {
                std::ostringstream os;
                os << "top Fock occupation " << top.value << " of mode '" << top.label << "' exceeds "
                   << opt.top_fock_tolerance << " at t=" << t << "; raise the cutoff";
                throw tolerance_error("dissipative", os.str());
            }
        }
        res.times.push_back(t);
        if (opt.sampler) res.series.push_back(opt.sampler(t, StateVector(l, psi)));
    };
    record(grid.t0);
    for (std::size_t step = 0; step < grid.steps; ++step) {
        const double t = grid.time(step);
        before = psi;
        propagator::detail::rk4_step(k.drift, t, grid.dt, psi, k1, k2, k3, k4, tmp);
        const double n2 = psi.squaredNorm();
        const double dp = 1.0 - n2;
        res.max_step_jump_probability = std::max(res.max_step_jump_probability, dp);
        if (dp >= opt.max_jump_probability) {
            std::ostringstream os;
            os << "jump probability " << dp << " per step reaches " << opt.max_jump_probability << " at t=" << t
               << " (dt=" << grid.dt << "); use a smaller dt";
            throw tolerance_error("dissipative", os.str());
        }
        if (!(n2 > 1e-300)) throw tolerance_error("dissipative", "state norm underflow");
        if (!items.empty() && uniform01(rng) < dp) {
            double total = 0.0;
            for (std::size_t c = 0; c < items.size(); ++c) {
                weights[c] = items[c].rate * (items[c].op * before).squaredNorm();
                total += weights[c];
            }
            const double r = uniform01(rng) * total;
            std::size_t which = items.size() - 1;
            double acc = 0.0;
            for (std::size_t c = 0; c < items.size(); ++c) {
                acc += weights[c];
                if (r < acc) {
                    which = c;
                    break;
                }
            }
            psi = items[which].op * before;
            const double nj = psi.norm();
            if (!(nj > 0.0)) throw tolerance_error("dissipative", "jump into a null state");
            psi /= nj;
            res.jumps.push_back({t + grid.dt, which, items[which].label});
        } else {
            psi /= std::sqrt(n2);
        }
        if ((step + 1) % grid.steps_per_sample == 0) record(grid.time(step + 1));
    }
    res.final_state = StateVector(l, psi);
    return res;
}

inline TrajectoryResult mcwf_trajectory(const StateVector& psi0, const TimeDependentOperator& h,
                                        const CollapseSet& c, double t0, double t1, std::uint64_t seed,
                                        const TrajectoryOptions& opt = {}) {
    const TrajectoryKernel k(h, c, t0, t1, opt);
    return run_trajectory(k, psi0, seed, opt);
}

// ---------------------------------------------------------------- ensembles

struct EnsembleOptions {
    std::size_t n_traj = 1;
    std::uint64_t base_seed = 0;
    unsigned threads = 1;
    bool keep_trajectories = false;
    TrajectoryOptions trajectory;
};

struct EnsembleResult {
    std::size_t n_traj = 0;
    std::vector<double> times;
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> std_error;  // NaN when n_traj == 1
    bool std_error_defined = false;
    std::vector<std::uint64_t> seeds;
    std::vector<std::size_t> jump_counts;
    TopOccupation max_top_fock;
    double max_step_jump_probability = 0.0;
    std::vector<TrajectoryResult> trajectories;  // only with keep_trajectories
};

class trajectory_error : public std::runtime_error {
public:
    trajectory_error(std::size_t index, const std::string& what)
        : std::runtime_error("trajectory " + std::to_string(index) + ": " + what), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

// Sum of f(0..n-1) by recursive halving; the result does not depend on how the terms were produced.
template <class F>
double pairwise_sum(std::size_t lo, std::size_t hi, const F& f) {
    if (hi - lo <= 8) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += f(i);
        return s;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    return pairwise_sum(lo, mid, f) + pairwise_sum(mid, hi, f);
}

inline EnsembleResult mcwf_ensemble(const StateVector& psi0, const TimeDependentOperator& h, const CollapseSet& c,
                                    double t0, double t1, const EnsembleOptions& opt) {
    if (opt.n_traj < 1) throw std::invalid_argument("mcwf_ensemble: n_traj must be >= 1");
    const TrajectoryKernel kernel(h, c, t0, t1, opt.trajectory);
    const std::size_t n = opt.n_traj;
    std::vector<TrajectoryResult> runs(n);
    std::vector<std::string> errors(n);

    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride) {
            try {
                runs[i] = run_trajectory(kernel, psi0, trajectory_seed(opt.base_seed, i), opt.trajectory);
                runs[i].final_state = {};
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    const unsigned nt = std::max(1u, std::min<unsigned>(opt.threads, static_cast<unsigned>(n)));
    if (nt == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < nt; ++w) pool.emplace_back(work, w, nt);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!errors[i].empty()) throw trajectory_error(i, errors[i]);

    EnsembleResult e;
    e.n_traj = n;
    e.times = runs[0].times;
    e.std_error_defined = n > 1;
    const std::size_t rows = runs[0].series.size(), cols = rows ? runs[0].series[0].size() : 0;
    e.mean.assign(rows, std::vector<double>(cols, 0.0));
    e.std_error.assign(rows, std::vector<double>(cols, std::numeric_limits<double>::quiet_NaN()));
    const double dn = static_cast<double>(n);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t q = 0; q < cols; ++q) {
            const double m = pairwise_sum(0, n, [&](std::size_t i) { return runs[i].series[r][q]; }) / dn;
            e.mean[r][q] = m;
            if (n > 1) {
                const double ss = pairwise_sum(0, n, [&](std::size_t i) {
                    const double d = runs[i].series[r][q] - m;
                    return d * d;
                });
                e.std_error[r][q] = std::sqrt(ss / (dn - 1.0) / dn);
            }
        }
    for (const auto& run : runs) {
        e.seeds.push_back(run.seed);
        e.jump_counts.push_back(run.jumps.size());
        if (run.max_top_fock.value > e.max_top_fock.value) e.max_top_fock = run.max_top_fock;
        e.max_step_jump_probability = std::max(e.max_step_jump_probability, run.max_step_jump_probability);
    }
    if (opt.keep_trajectories) e.trajectories = std::move(runs);
    return e;
}

// CSV: trajectory,seed,time,channel,label
inline void write_jump_log(std::ostream& os, const std::vector<TrajectoryResult>& runs) {
    os << "trajectory,seed,time,channel,label\n";
    char buf[64];
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (const auto& j : runs[i].jumps) {
            std::snprintf(buf, sizeof buf, "%.17g", j.time);
            os << i << ',' << runs[i].seed << ',' << buf << ',' << j.channel << ',' << j.label << '\n';
        }
}

}  // namespace cavlink::dissipative
