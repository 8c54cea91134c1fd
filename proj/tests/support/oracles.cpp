#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace conserva::test {

Matrix matrix_exponential(const Matrix& a) {
    const int n = a.rows();
    // Scale so the norm is small, Taylor to order 16, square back.
    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) row += std::abs(a(i, j));
        norm = std::max(norm, row);
    }
    int squarings = 0;
    double scale = 1.0;
    while (norm * scale > 0.5) {
        scale *= 0.5;
        ++squarings;
    }
    Matrix scaled(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) scaled(i, j) = a(i, j) * scale;

    Matrix result = Matrix::identity(n);
    Matrix term = Matrix::identity(n);
    Matrix tmp;
    for (int order = 1; order <= 16; ++order) {
        matmul(term, scaled, tmp, ExecMode::serial);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) term(i, j) = tmp(i, j) / order;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) result(i, j) += term(i, j);
    }
    for (int s = 0; s < squarings; ++s) {
        matmul(result, result, tmp, ExecMode::serial);
        result = tmp;
    }
    return result;
}

MasterEquation::MasterEquation(const RatePolicy& policy, int n_sites, int max_count)
    : n_sites_(n_sites), base_(max_count + 1) {
    // Enumerate all occupancy vectors with entries 0..max_count.
    std::vector<std::int32_t> current(n_sites, 0);
    const std::size_t total = [&] {
        std::size_t t = 1;
        for (int i = 0; i < n_sites; ++i) t *= std::size_t(base_);
        return t;
    }();
    states_.reserve(total);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (int i = 0; i < n_sites; ++i) {
            current[i] = std::int32_t(c % base_);
            c /= base_;
        }
        states_.push_back(current);
    }

    const int dim = int(states_.size());
    generator_ = Matrix(dim, dim);
    for (int s = 0; s < dim; ++s) {
        const auto& eta = states_[s];
        double out_rate = 0.0;
        for (int i = 0; i < n_sites; ++i) {
            if (eta[i] == 0) continue;
            for (int j = 0; j < n_sites; ++j) {
                if (j == i) continue;
                if (eta[j] + 1 >= base_ + 1) continue;
                const double rate = policy.eval(eta[i], eta[j], double(i + 1) / n_sites,
                                                double(j + 1) / n_sites) /
                                    n_sites;
                if (rate <= 0.0) continue;
                std::vector<std::int32_t> next = eta;
                --next[i];
                ++next[j];
                if (next[j] >= base_) {
                    // Jump would leave the truncated state space; the tests
                    // choose max_count large enough that this cannot happen.
                    throw std::logic_error("master equation: state space too small");
                }
                generator_(s, state_index(next)) += rate;
                out_rate += rate;
            }
        }
        generator_(s, s) -= out_rate;
    }
}

int MasterEquation::state_index(std::span<const std::int32_t> counts) const {
    std::size_t code = 0;
    for (int i = n_sites_ - 1; i >= 0; --i) {
        code = code * std::size_t(base_) + std::size_t(counts[i]);
    }
    return int(code);
}

std::vector<double> MasterEquation::law_at(std::span<const double> initial, double t) const {
    const int dim = int(states_.size());
    Matrix qt(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) qt(i, j) = generator_(i, j) * t;
    const Matrix expm = matrix_exponential(qt);
    std::vector<double> law(dim, 0.0);
    for (int j = 0; j < dim; ++j) {
        double acc = 0.0;
        for (int i = 0; i < dim; ++i) acc += initial[i] * expm(i, j);
        law[j] = acc;
    }
    return law;
}

std::vector<double> MasterEquation::product_initial(
    const std::vector<std::vector<double>>& site_level_probs) const {
    std::vector<double> init(states_.size(), 1.0);
    for (std::size_t s = 0; s < states_.size(); ++s) {
        for (int i = 0; i < n_sites_; ++i) {
            const int level = states_[s][i];
            init[s] *= level < int(site_level_probs[i].size()) ? site_level_probs[i][level]
                                                               : 0.0;
        }
    }
    return init;
}

double MasterEquation::marginal(std::span<const double> law, int site, int level) const {
    double p = 0.0;
    for (std::size_t s = 0; s < states_.size(); ++s) {
        if (states_[s][site] == level) p += law[s];
    }
    return p;
}

double MasterEquation::joint(std::span<const double> law, int x, int k1, int y,
                             int k2) const {
    double p = 0.0;
    for (std::size_t s = 0; s < states_.size(); ++s) {
        if (states_[s][x] == k1 && states_[s][y] == k2) p += law[s];
    }
    return p;
}

std::vector<int> influence_layers_bruteforce(int n_sites, std::span<const Arrow> arrows,
                                             int root, double t) {
    std::vector<Arrow> events(arrows.begin(), arrows.end());
    std::erase_if(events, [t](const Arrow& a) { return a.time > t; });
    std::sort(events.begin(), events.end(),
              [](const Arrow& a, const Arrow& b) { return a.time < b.time; });
    const int e = int(events.size());
    if (e > 20) throw std::logic_error("influence oracle: too many events to enumerate");

    std::vector<int> layer(n_sites, -1);
    layer[root] = 0;
    // Every subset of events, taken in time order, is one candidate chain;
    // walk it from each start site and keep the shortest chain reaching the
    // root.
    for (std::uint32_t mask = 1; mask < (1u << e); ++mask) {
        std::vector<int> chain;
        for (int i = 0; i < e; ++i) {
            if (mask & (1u << i)) chain.push_back(i);
        }
        for (int start = 0; start < n_sites; ++start) {
            if (start == root) continue;
            int at = start;
            bool ok = true;
            for (int idx : chain) {
                const Arrow& ev = events[idx];
                if (ev.from == at) {
                    at = ev.to;
                } else if (ev.to == at) {
                    at = ev.from;
                } else {
                    ok = false;
                    break;
                }
            }
            if (ok && at == root) {
                const int len = int(chain.size());
                if (layer[start] < 0 || len < layer[start]) layer[start] = len;
            }
        }
    }
    return layer;
}

std::vector<double> independent_particle_means(const PairKernel& phi, const HarmonicFn& psi,
                                               int n_sites, double t) {
    Matrix q(n_sites, n_sites);
    for (int i = 0; i < n_sites; ++i) {
        double out = 0.0;
        for (int j = 0; j < n_sites; ++j) {
            if (j == i) continue;
            const double rate =
                phi(double(i + 1) / n_sites, double(j + 1) / n_sites) / n_sites;
            q(i, j) = rate * t;
            out += rate;
        }
        q(i, i) = -out * t;
    }
    const Matrix pt = matrix_exponential(q);
    std::vector<double> means(n_sites, 0.0);
    for (int i = 0; i < n_sites; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n_sites; ++j) {
            acc += psi(double(j + 1) / n_sites) * pt(j, i);
        }
        means[i] = acc;
    }
    return means;
}

} // namespace conserva::test
