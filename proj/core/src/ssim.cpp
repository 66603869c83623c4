#include "deepfuse/ssim.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "deepfuse/error.hpp"

namespace deepfuse {
namespace {

std::vector<double> gaussian_window(const SsimConfig& config) {
    const int w = config.window;
    std::vector<double> g1(static_cast<std::size_t>(w));
    double total = 0.0;
    for (int i = 0; i < w; ++i) {
        const double d = i - (w - 1) / 2.0;
        g1[i] = std::exp(-(d * d) / (2.0 * config.sigma * config.sigma));
        total += g1[i];
    }
    for (double& v : g1) v /= total;
    std::vector<double> g2(static_cast<std::size_t>(w) * w);
    for (int y = 0; y < w; ++y)
        for (int x = 0; x < w; ++x) g2[static_cast<std::size_t>(y) * w + x] = g1[y] * g1[x];
    return g2;
}

SsimGrad evaluate(const PlanarImage& a, const PlanarImage& b, const SsimConfig& config,
                  bool want_grad) {
    if (!a.same_dims(b)) throw InputError("ssim: images must share dimensions");
    if (config.window < 1 || config.window % 2 == 0 || !(config.sigma > 0.0))
        throw ConfigError("ssim: window must be odd and sigma positive");
    if (std::min(a.height, a.width) < config.window) {
        throw InputError("ssim: image " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " is smaller than the window");
    }
    const int w = config.window;
    const std::vector<double> kernel = gaussian_window(config);
    const double c1 = config.k1 * config.k1;
    const double c2 = config.k2 * config.k2;
    const int rows = a.height - w + 1;
    const int cols = a.width - w + 1;
    const double inv_windows = 1.0 / (static_cast<double>(rows) * cols);

    SsimGrad out;
    if (want_grad) out.gradient = PlanarImage(a.height, a.width);
    double total = 0.0;
    for (int y0 = 0; y0 < rows; ++y0) {
        for (int x0 = 0; x0 < cols; ++x0) {
            double mu_a = 0.0, mu_b = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
            for (int y = 0; y < w; ++y) {
                for (int x = 0; x < w; ++x) {
                    const double g = kernel[static_cast<std::size_t>(y) * w + x];
                    const double va = a.at(y0 + y, x0 + x);
                    const double vb = b.at(y0 + y, x0 + x);
                    mu_a += g * va;
                    mu_b += g * vb;
                    saa += g * va * va;
                    sbb += g * vb * vb;
                    sab += g * va * vb;
                }
            }
            const double var_a = saa - mu_a * mu_a;
            const double var_b = sbb - mu_b * mu_b;
            const double cov = sab - mu_a * mu_b;
            const double lum_num = 2.0 * mu_a * mu_b + c1;
            const double lum_den = mu_a * mu_a + mu_b * mu_b + c1;
            const double cs_num = 2.0 * cov + c2;
            const double cs_den = var_a + var_b + c2;
            const double lum = lum_num / lum_den;
            const double cs = cs_num / cs_den;
            total += lum * cs;

            if (want_grad) {
                // d/da_i = g_i * (dS/dmu_a + dS/dvar_a * 2(a_i - mu_a) + dS/dcov * (b_i - mu_b))
                const double d_mu = cs * (2.0 * mu_b * lum_den - lum_num * 2.0 * mu_a) /
                                    (lum_den * lum_den);
                const double d_var = -lum * cs_num / (cs_den * cs_den);
                const double d_cov = lum * 2.0 / cs_den;
                for (int y = 0; y < w; ++y) {
                    for (int x = 0; x < w; ++x) {
                        const double g = kernel[static_cast<std::size_t>(y) * w + x];
                        const double va = a.at(y0 + y, x0 + x);
                        const double vb = b.at(y0 + y, x0 + x);
                        out.gradient.at(y0 + y, x0 + x) +=
                            inv_windows * g *
                            (d_mu + d_var * 2.0 * (va - mu_a) + d_cov * (vb - mu_b));
                    }
                }
            }
        }
    }
    out.value = total * inv_windows;
    if (!std::isfinite(out.value)) throw NumericError("ssim: non-finite result");
    return out;
}

}  // namespace

double ssim(const PlanarImage& a, const PlanarImage& b, const SsimConfig& config) {
    return evaluate(a, b, config, false).value;
}

SsimGrad ssim_with_grad(const PlanarImage& a, const PlanarImage& b, const SsimConfig& config) {
    return evaluate(a, b, config, true);
}

}  // namespace deepfuse
