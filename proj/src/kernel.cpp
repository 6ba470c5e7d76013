#include "rcm/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rcm {

namespace {
constexpr std::int64_t kDenseScratchGuard = 60'000'000;

// Dense scratch shared by the forward and adjoint one-step applications.
struct Scratch {
    std::vector<double> acc;
    std::vector<char> touched;
    std::vector<Vertex> touchedList;

    explicit Scratch(std::int64_t n) : acc(n, 0.0), touched(n, 0) {}

    void deposit(Vertex w, double m) {
        acc[w] += m;
        if (!touched[w]) {
            touched[w] = 1;
            touchedList.push_back(w);
        }
    }

    void harvest(SparseDistribution& out) {
        std::sort(touchedList.begin(), touchedList.end());
        out.support.assign(touchedList.begin(), touchedList.end());
        out.mass.resize(touchedList.size());
        for (std::size_t i = 0; i < touchedList.size(); ++i) {
            Vertex w = touchedList[i];
            out.mass[i] = acc[w];
            acc[w] = 0.0;
            touched[w] = 0;
        }
        touchedList.clear();
    }
};

void step_forward(const WalkKernel& kernel, const SparseDistribution& in,
                  Scratch& scratch, SparseDistribution& out) {
    RowBuffer row;
    for (std::size_t i = 0; i < in.support.size(); ++i) {
        Vertex v = in.support[i];
        double m = in.mass[i];
        kernel.row(v, row);
        for (int k = 0; k < row.count; ++k)
            scratch.deposit(row.nbr[k], m * row.prob[k]);
    }
    scratch.harvest(out);
}

// out(z) = sum_w P(z,w) in(w): scatter through the receiving vertex's pi.
void step_adjoint(const WalkKernel& kernel, const SparseDistribution& in,
                  Scratch& scratch, SparseDistribution& out) {
    const Environment& env = kernel.env();
    const BoxSpec& box = env.box();
    for (std::size_t i = 0; i < in.support.size(); ++i) {
        Vertex w = in.support[i];
        double m = in.mass[i];
        for (int a = 0; a < box.dimension; ++a) {
            Vertex p = box.step(w, a, +1);
            if (p >= 0)  // edge <w,p> owned by w
                scratch.deposit(p, m * env.value(w, a) / kernel.pi(p));
            Vertex q = box.step(w, a, -1);
            if (q >= 0)  // edge <q,w> owned by q
                scratch.deposit(q, m * env.value(q, a) / kernel.pi(q));
        }
    }
    scratch.harvest(out);
}

int pick_from_row(const double* weights, int count, double total, double u) {
    double target = u * total;
    double c = 0.0;
    for (int i = 0; i < count; ++i) {
        c += weights[i];
        if (target <= c) return i;
    }
    return count - 1;
}
}  // namespace

WalkKernel::WalkKernel(const Environment& env) : env_(&env) {
    const BoxSpec& box = env.box();
    const std::int64_t n = box.n_vertices();
    const int d = box.dimension;
    pi_.assign(n, 0.0);
    for (Vertex v = 0; v < n; ++v) {
        for (int a = 0; a < d; ++a) {
            if (!box.edge_exists(v, a)) continue;
            double w = env.value(v, a);
            pi_[v] += w;
            pi_[box.step(v, a, +1)] += w;
        }
    }
}

void WalkKernel::row(Vertex v, RowBuffer& out) const {
    const BoxSpec& box = env_->box();
    out.count = 0;
    double invPi = 1.0 / pi_[v];
    for (int a = 0; a < box.dimension; ++a) {
        Vertex p = box.step(v, a, +1);
        if (p >= 0) {
            out.nbr[out.count] = p;
            out.prob[out.count++] = env_->value(v, a) * invPi;
        }
        Vertex m = box.step(v, a, -1);
        if (m >= 0) {
            // edge <m, v> is owned by m along the same axis
            out.nbr[out.count] = m;
            out.prob[out.count++] = env_->value(m, a) * invPi;
        }
    }
}

double SparseDistribution::total() const { return kahan_total(mass); }

double SparseDistribution::mass_at(Vertex v) const {
    auto it = std::lower_bound(support.begin(), support.end(), v);
    if (it == support.end() || *it != v) return 0.0;
    return mass[it - support.begin()];
}

SparseDistribution evolve(const WalkKernel& kernel, const SparseDistribution& dist,
                          std::int64_t steps, bool overrideHorizon) {
    if (steps < 0) throw ParameterError("evolve requires steps >= 0");
    const BoxSpec& box = kernel.box();
    if (dist.origin)
        box.require_horizon(*dist.origin, dist.elapsed + steps, overrideHorizon);
    if (steps == 0) return dist;
    if (box.n_vertices() > kDenseScratchGuard)
        throw ResourceError("box too large for the dense evolve scratch");

    Scratch scratch(box.n_vertices());
    SparseDistribution cur = dist;
    SparseDistribution next;
    for (std::int64_t s = 0; s < steps; ++s) {
        step_forward(kernel, cur, scratch, next);
        std::swap(cur, next);
    }
    cur.origin = dist.origin;
    cur.elapsed = dist.elapsed + steps;
    return cur;
}

std::vector<double> heat_diagonal(const WalkKernel& kernel, Vertex origin,
                                  std::int64_t nMax, bool overrideHorizon) {
    if (nMax < 1) throw ParameterError("heat_diagonal requires nMax >= 1");
    const BoxSpec& box = kernel.box();
    box.require_horizon(origin, 2 * nMax, overrideHorizon);
    if (box.n_vertices() > kDenseScratchGuard)
        throw ResourceError("box too large for the dense evolve scratch");

    Scratch scratch(box.n_vertices());
    SparseDistribution cur = SparseDistribution::delta(origin);
    SparseDistribution next;
    std::vector<double> out;
    out.reserve(nMax);
    for (std::int64_t n = 1; n <= nMax; ++n) {
        for (int half = 0; half < 2; ++half) {
            step_forward(kernel, cur, scratch, next);
            std::swap(cur, next);
        }
        out.push_back(cur.mass_at(origin));
    }
    return out;
}

std::vector<double> lambda_seq(const std::vector<double>& heat, int d) {
    std::vector<double> out(heat.size());
    for (std::size_t i = 0; i < heat.size(); ++i) {
        double n = static_cast<double>(i + 1);
        out[i] = std::pow(n, 0.5 * d) * heat[i];
    }
    return out;
}

std::vector<double> zeta_seq(const std::vector<double>& heat, int d) {
    if (d < 4) throw DomainError("zeta_n is defined only for d >= 4");
    std::vector<double> out(heat.size());
    for (std::size_t i = 0; i < heat.size(); ++i) {
        double n = static_cast<double>(i + 1);
        if (d == 4) {
            out[i] = (i == 0) ? std::numeric_limits<double>::quiet_NaN()
                              : n * n / std::sqrt(std::log(n)) * heat[i];
        } else if (d <= 8) {
            out[i] = std::pow(n, 0.25 * d + 1.0) * heat[i];
        } else {
            out[i] = n * n * n * heat[i];
        }
    }
    return out;
}

Path sample_path(const WalkKernel& kernel, Vertex start, std::int64_t steps,
                 RngStream& rng) {
    if (steps < 0) throw ParameterError("sample_path requires steps >= 0");
    Path path;
    path.mode = "forward";
    path.vertices.reserve(steps + 1);
    path.vertices.push_back(start);
    RowBuffer row;
    Vertex cur = start;
    for (std::int64_t s = 0; s < steps; ++s) {
        kernel.row(cur, row);
        int k = pick_from_row(row.prob, row.count, 1.0, rng.next_u01());
        cur = row.nbr[k];
        path.vertices.push_back(cur);
    }
    return path;
}

BridgeSampler::BridgeSampler(const WalkKernel& kernel, Vertex origin,
                             std::int64_t horizon2n, bool overrideHorizon,
                             std::size_t memoryBudgetBytes)
    : kernel_(&kernel), origin_(origin), horizon2n_(horizon2n) {
    if (horizon2n < 2 || horizon2n % 2 != 0)
        throw ParameterError("bridge horizon must be a positive even number");
    const BoxSpec& box = kernel.box();
    box.require_horizon(origin, horizon2n, overrideHorizon);
    if (box.n_vertices() > kDenseScratchGuard)
        throw ResourceError("box too large for the dense evolve scratch");

    Scratch scratch(box.n_vertices());
    std::vector<SparseDistribution> all;
    all.reserve(horizon2n + 1);
    all.push_back(SparseDistribution::delta(origin));
    all.back().origin.reset();
    std::size_t bytes = 0;
    for (std::int64_t m = 1; m <= horizon2n; ++m) {
        SparseDistribution next;
        step_adjoint(kernel, all.back(), scratch, next);
        bytes += next.size() * (sizeof(Vertex) + sizeof(double));
        all.push_back(std::move(next));
    }
    returnProb_ = all.back().mass_at(origin);
    if (returnProb_ <= 0.0)
        throw NoBridgeError("origin cannot be reached again at the bridge horizon");

    if (bytes > memoryBudgetBytes) {
        // Keep the even vectors only; odd ones are rebuilt per use at <= 2x
        // compute. If even that does not fit, give up.
        if (bytes / 2 > memoryBudgetBytes)
            throw ResourceError("backward vectors exceed the memory budget");
        checkpointed_ = true;
        stored_.reserve(horizon2n / 2 + 1);
        for (std::int64_t m = 0; m <= horizon2n; m += 2)
            stored_.push_back(std::move(all[m]));
    } else {
        stored_ = std::move(all);
    }
}

SparseDistribution BridgeSampler::rebuild_odd(std::int64_t m) const {
    Scratch scratch(kernel_->box().n_vertices());
    SparseDistribution out;
    step_adjoint(*kernel_, stored_[(m - 1) / 2], scratch, out);
    return out;
}

double BridgeSampler::backward(std::int64_t m, Vertex z) const {
    if (m < 0 || m > horizon2n_) throw ParameterError("backward index out of range");
    if (!checkpointed_) return stored_[m].mass_at(z);
    if (m % 2 == 0) return stored_[m / 2].mass_at(z);
    return rebuild_odd(m).mass_at(z);
}

Path BridgeSampler::sample_horizon(RngStream& rng, std::int64_t horizon2m) const {
    if (horizon2m < 2 || horizon2m % 2 != 0 || horizon2m > horizon2n_)
        throw ParameterError("bridge horizon must be even and within the built range");
    if (horizon2m < horizon2n_ && backward(horizon2m, origin_) <= 0.0)
        throw NoBridgeError("origin cannot be reached again at this horizon");
    Path path;
    path.mode = "exactBridge";
    path.vertices.reserve(horizon2m + 1);
    path.vertices.push_back(origin_);
    RowBuffer row;
    double weights[2 * kMaxDim];
    Vertex cur = origin_;
    SparseDistribution oddScratch;
    for (std::int64_t k = 0; k < horizon2m; ++k) {
        std::int64_t m = horizon2m - k - 1;  // steps remaining after the move
        const SparseDistribution* back;
        if (!checkpointed_) {
            back = &stored_[m];
        } else if (m % 2 == 0) {
            back = &stored_[m / 2];
        } else {
            oddScratch = rebuild_odd(m);
            back = &oddScratch;
        }
        kernel_->row(cur, row);
        double total = 0.0;
        for (int i = 0; i < row.count; ++i) {
            weights[i] = row.prob[i] * back->mass_at(row.nbr[i]);
            total += weights[i];
        }
        if (total <= 0.0)
            throw NumericalError("bridge sampling reached a dead end");
        int pick = pick_from_row(weights, row.count, total, rng.next_u01());
        cur = row.nbr[pick];
        path.vertices.push_back(cur);
    }
    return path;
}

Path sample_bridge(const WalkKernel& kernel, Vertex origin, std::int64_t horizon2n,
                   BridgeMode mode, RngStream& rng, bool overrideHorizon,
                   std::int64_t maxAttempts) {
    if (mode == BridgeMode::exactBridge) {
        BridgeSampler sampler(kernel, origin, horizon2n, overrideHorizon);
        return sampler.sample(rng);
    }
    kernel.box().require_horizon(origin, horizon2n, overrideHorizon);
    for (std::int64_t attempt = 1; attempt <= maxAttempts; ++attempt) {
        Path p = sample_path(kernel, origin, horizon2n, rng);
        if (p.vertices.back() == origin) {
            p.mode = "rejection";
            p.attempts = attempt;
            return p;
        }
    }
    throw BudgetError("rejection bridge: no return within " +
                      std::to_string(maxAttempts) + " attempts");
}

}  // namespace rcm
