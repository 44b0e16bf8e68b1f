#include "medsens/prob.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace medsens {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kTwoPi = 6.2831853071795864769;

double phid(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

// Acklam's rational initial guess for the normal quantile; refined below.
double quantile_seed(double p) {
    static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                -2.759285104469687e+02, 1.383577518672690e+02,
                                -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                -1.556989798598866e+02, 6.680131188771972e+01,
                                -1.328068155288572e+01};
    static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                -2.400758277161838e+00, -2.549732539343734e+00,
                                4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    if (p < plow) {
        double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        double q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    double q = p - 0.5;
    double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Gauss-Legendre half-nodes used by the bivariate normal quadrature.
const double kGL6w[3] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
const double kGL6x[3] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
const double kGL12w[6] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                          0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
const double kGL12x[6] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                          0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
const double kGL20w[10] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                           0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                           0.1316886384491766,  0.1420961093183820,  0.1491729864726037,
                           0.1527533871307258};
const double kGL20x[10] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                           0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                           0.5108670019508271, 0.3737060887154195, 0.2277858511416451,
                           0.07652652113349733};

// P(X > dh, Y > dk) for standard bivariate normal with correlation r.
// Hybrid of Drezner-Wesolowsky and the Genz tail reformulation.
double bvnu(double dh, double dk, double r) {
    const double* w;
    const double* x;
    int lg;
    double ar = std::fabs(r);
    if (ar < 0.3) {
        w = kGL6w; x = kGL6x; lg = 3;
    } else if (ar < 0.75) {
        w = kGL12w; x = kGL12x; lg = 6;
    } else {
        w = kGL20w; x = kGL20x; lg = 10;
    }

    double h = dh;
    double k = dk;
    double hk = h * k;
    double bvn = 0.0;

    if (ar < 0.925) {
        if (ar > 0.0) {
            double hs = (h * h + k * k) / 2.0;
            double asr = std::asin(r);
            for (int i = 0; i < lg; ++i) {
                for (int is = -1; is <= 1; is += 2) {
                    double sn = std::sin(asr * (is * x[i] + 1.0) / 2.0);
                    bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
                }
            }
            bvn = bvn * asr / (2.0 * kTwoPi);
        }
        return bvn + phid(-h) * phid(-k);
    }

    if (r < 0.0) {
        k = -k;
        hk = -hk;
    }
    if (ar < 1.0) {
        double as = (1.0 - r) * (1.0 + r);
        double a = std::sqrt(as);
        double bs = (h - k) * (h - k);
        double c = (4.0 - hk) / 8.0;
        double d = (12.0 - hk) / 16.0;
        double asr = -(bs / as + hk) / 2.0;
        if (asr > -100.0) {
            bvn = a * std::exp(asr) *
                  (1.0 - c * (bs - as) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as * as / 5.0);
        }
        if (-hk < 100.0) {
            double b = std::sqrt(bs);
            bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * phid(-b / a) * b *
                   (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for (int i = 0; i < lg; ++i) {
            for (int is = -1; is <= 1; is += 2) {
                double xs = a * (is * x[i] + 1.0);
                xs *= xs;
                double rs = std::sqrt(1.0 - xs);
                double asr2 = -(bs / xs + hk) / 2.0;
                if (asr2 > -100.0) {
                    bvn += a * w[i] * std::exp(asr2) *
                           (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                            (1.0 + c * xs * (1.0 + d * xs)));
                }
            }
        }
        bvn = -bvn / kTwoPi;
    }
    if (r > 0.0) {
        return bvn + phid(-std::max(h, k));
    }
    bvn = -bvn;
    if (k > h) {
        bvn += phid(k) - phid(h);
    }
    return bvn;
}

}  // namespace

double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(kTwoPi);
}

double std_normal_cdf(double x) {
    if (!std::isfinite(x)) {
        throw std::invalid_argument("std_normal_cdf: non-finite input");
    }
    return phid(x);
}

double std_normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("std_normal_quantile: p must lie in (0,1)");
    }
    double z = quantile_seed(p);
    // one Halley step pushes the seed's ~1e-9 relative error to ~1e-15
    for (int i = 0; i < 2; ++i) {
        double e = phid(z) - p;
        double u = e * std::sqrt(kTwoPi) * std::exp(0.5 * z * z);
        z -= u / (1.0 + 0.5 * z * u);
    }
    return z;
}

double bivariate_normal_cdf(double x, double y, double rho) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw std::invalid_argument("bivariate_normal_cdf: non-finite coordinates");
    }
    if (!(rho >= -1.0 && rho <= 1.0)) {
        throw std::invalid_argument("bivariate_normal_cdf: |rho| must be <= 1");
    }
    if (rho == 1.0) return phid(std::min(x, y));
    if (rho == -1.0) return std::max(0.0, phid(x) + phid(y) - 1.0);
    double p = bvnu(-x, -y, rho);
    return std::min(1.0, std::max(0.0, p));
}

double gamma_p(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) {
        throw std::invalid_argument("gamma_p: requires a > 0 and x >= 0");
    }
    if (x == 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        // series expansion
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-16) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    // continued fraction (modified Lentz)
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    double q = std::exp(-x + a * std::log(x) - lg) * h;
    return 1.0 - q;
}

double gamma_p_inv(double a, double p) {
    if (!(a > 0.0)) throw std::invalid_argument("gamma_p_inv: requires a > 0");
    if (!(p >= 0.0 && p < 1.0)) {
        throw std::invalid_argument("gamma_p_inv: requires 0 <= p < 1");
    }
    if (p == 0.0) return 0.0;

    const double lg = std::lgamma(a);
    double x;
    if (a > 1.0) {
        // Wilson-Hilferty seed
        double g = std_normal_quantile(std::min(std::max(p, 1e-300), 1.0 - 1e-16));
        double t = 1.0 - 1.0 / (9.0 * a) + g / (3.0 * std::sqrt(a));
        x = a * t * t * t;
        if (x <= 0.0) x = 1e-8;
    } else {
        double t = 1.0 - a * (0.253 + a * 0.12);
        if (p < t) {
            x = std::pow(p / t, 1.0 / a);
        } else {
            x = 1.0 - std::log1p(-(p - t) / (1.0 - t));
        }
    }
    // safeguarded Newton on gamma_p(a, x) - p
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 100; ++it) {
        double f = gamma_p(a, x) - p;
        if (f > 0.0) hi = x; else lo = x;
        double dens = std::exp((a - 1.0) * std::log(x) - x - lg);
        double step = (dens > 0.0) ? f / dens : 0.0;
        double xn = x - step;
        if (!(xn > lo && xn < hi) || dens == 0.0) {
            xn = std::isfinite(hi) ? 0.5 * (lo + hi) : x * 2.0;
        }
        if (std::fabs(xn - x) <= 1e-14 * (1.0 + std::fabs(x))) {
            return xn;
        }
        x = xn;
    }
    return x;
}

double gamma_quantile(double p, double shape, double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("gamma_quantile: rate must be > 0");
    return gamma_p_inv(shape, p) / rate;
}

double logistic_quantile(double p, double scale) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("logistic_quantile: p must lie in (0,1)");
    }
    return scale * std::log(p / (1.0 - p));
}

}  // namespace medsens
