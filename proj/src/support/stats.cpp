#include "conserva/stats.hpp"

#include <cmath>
#include <limits>

namespace conserva {

namespace {

// Series expansion of P(a,x), valid for x < a+1.
double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a,x), valid for x >= a+1.
double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -double(i) * (double(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace

double gamma_q(double a, double x) {
    if (x < 0.0 || a <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_cf(a, x);
}

double chi_square_sf(double x, int df) {
    if (df <= 0) return std::numeric_limits<double>::quiet_NaN();
    return gamma_q(0.5 * df, 0.5 * x);
}

ProportionCI wilson_interval(std::size_t hits, std::size_t trials) {
    ProportionCI ci{0.0, 0.0, 0.0};
    if (trials == 0) return ci;
    const double z = 1.959963984540054; // 97.5% normal quantile
    const double n = double(trials);
    const double p = double(hits) / n;
    ci.estimate = p;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ci.low = std::max(0.0, center - half);
    ci.high = std::min(1.0, center + half);
    return ci;
}

SlopeFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                           std::span<const double> y_sd) {
    SlopeFit fit;
    double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(y[i])) continue;
        double sd = (i < y_sd.size() && std::isfinite(y_sd[i]) && y_sd[i] > 0.0)
                        ? y_sd[i]
                        : 1.0;
        const double w = 1.0 / (sd * sd);
        sw += w;
        swx += w * x[i];
        swy += w * y[i];
        swxx += w * x[i] * x[i];
        swxy += w * x[i] * y[i];
        ++fit.points_used;
    }
    if (fit.points_used < 2) return fit;
    const double det = sw * swxx - swx * swx;
    if (det <= 0.0) return fit;
    fit.slope = (sw * swxy - swx * swy) / det;
    fit.intercept = (swxx * swy - swx * swxy) / det;
    fit.slope_se = std::sqrt(sw / det);
    fit.defined = true;
    return fit;
}

SlopeFit loglog_fit(std::span<const double> x, std::span<const double> y,
                    std::span<const double> y_sd) {
    std::vector<double> lx, ly, lsd;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double ay = std::fabs(y[i]);
        if (!(x[i] > 0.0) || !(ay > 0.0) || !std::isfinite(ay)) continue;
        lx.push_back(std::log(x[i]));
        ly.push_back(std::log(ay));
        const double sd = (i < y_sd.size() && std::isfinite(y_sd[i])) ? y_sd[i] : 0.0;
        lsd.push_back(sd > 0.0 ? sd / ay : 1.0);
    }
    return weighted_line_fit(lx, ly, lsd);
}

double chi_square_gof_pvalue(std::span<const std::size_t> observed,
                             std::span<const double> expected_probs) {
    std::size_t total = 0;
    for (auto c : observed) total += c;
    if (total == 0 || observed.size() != expected_probs.size()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    // Pool cells whose expected count is below 5 into one bucket.
    double stat = 0.0;
    int cells = 0;
    double pooled_obs = 0.0, pooled_exp = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = expected_probs[i] * double(total);
        if (e < 5.0) {
            pooled_obs += double(observed[i]);
            pooled_exp += e;
            continue;
        }
        const double d = double(observed[i]) - e;
        stat += d * d / e;
        ++cells;
    }
    if (pooled_exp > 0.0) {
        const double d = pooled_obs - pooled_exp;
        stat += d * d / pooled_exp;
        ++cells;
    }
    if (cells < 2) return 1.0;
    return chi_square_sf(stat, cells - 1);
}

double chi_square_homogeneity_pvalue(std::span<const std::size_t> counts_a,
                                     std::span<const std::size_t> counts_b) {
    if (counts_a.size() != counts_b.size()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double na = 0, nb = 0;
    for (auto c : counts_a) na += double(c);
    for (auto c : counts_b) nb += double(c);
    if (na == 0 || nb == 0) return std::numeric_limits<double>::quiet_NaN();

    double stat = 0.0;
    int cells = 0;
    double pa = 0, pb = 0, pe = 0;
    for (std::size_t i = 0; i < counts_a.size(); ++i) {
        const double tot = double(counts_a[i]) + double(counts_b[i]);
        const double ea = tot * na / (na + nb);
        const double eb = tot * nb / (na + nb);
        if (ea < 5.0 || eb < 5.0) {
            pa += double(counts_a[i]);
            pb += double(counts_b[i]);
            pe += tot;
            continue;
        }
        const double da = double(counts_a[i]) - ea;
        const double db = double(counts_b[i]) - eb;
        stat += da * da / ea + db * db / eb;
        ++cells;
    }
    if (pe > 0.0) {
        const double ea = pe * na / (na + nb);
        const double eb = pe * nb / (na + nb);
        if (ea > 0 && eb > 0) {
            stat += (pa - ea) * (pa - ea) / ea + (pb - eb) * (pb - eb) / eb;
            ++cells;
        }
    }
    if (cells < 2) return 1.0;
    return chi_square_sf(stat, cells - 1);
}

} // namespace conserva
