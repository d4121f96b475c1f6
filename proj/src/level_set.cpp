#include "corseg/level_set.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "corseg/parallel.hpp"

namespace corseg {

namespace {

constexpr double kPhiCap = 2.5;
constexpr double kL0Cap = 0.5;
constexpr double kMaxStep = 0.45;
constexpr std::int8_t kFarPos = 3;
constexpr std::int8_t kFarNeg = -3;

bool nonneg(double phi) { return phi >= 0.0; }

} // namespace

void LevelSetParams::validate() const {
    if (iterations < 0) throw input_error("iteration count must be >= 0");
    if (!(time_step > 0.0)) throw input_error("time step must be positive");
    if (curvature_factor < 0.0 || data_weight < 0.0 || shape_weight < 0.0 || label_weight < 0.0)
        throw input_error("level-set weights must be >= 0");
    if (shape_weight > 0.0 && prior == nullptr)
        throw input_error("shape_weight > 0 requires a prior shape");
}

void SparseFieldState::check_invariants() const {
    const GridDims& d = phi.dims();
    const auto& pv = phi.values();
    std::vector<std::int64_t> zeros;
    for (std::int64_t idx = 0; idx < phi.size(); ++idx) {
        std::size_t u = static_cast<std::size_t>(idx);
        double p = pv[u];
        if (!std::isfinite(p) || std::abs(p) > kPhiCap + 1e-12)
            throw numeric_error("phi out of band range at linear index " + std::to_string(idx));
        std::int8_t l = layers[u];
        double m = std::abs(p);
        bool ok = true;
        switch (l) {
            case 0: ok = m <= kL0Cap + 1e-12; break;
            case 1:
            case -1: ok = m > 0.5 - 1e-12 && m <= 1.5 + 1e-12; break;
            case 2:
            case -2: ok = m > 1.5 - 1e-12 && m <= 2.5 + 1e-12; break;
            default: break;  // far layers carry the cap value
        }
        if (!ok)
            throw numeric_error("layer " + std::to_string(int(l)) + " holds phi " + std::to_string(p) +
                                " at linear index " + std::to_string(idx));
        if (l > 0 && p < 0.0) throw numeric_error("positive layer with negative phi");
        if (l < 0 && p >= 0.0 && l != 0) throw numeric_error("negative layer with nonnegative phi");
        if (l == 0) zeros.push_back(idx);
    }
    if (zeros != active) throw numeric_error("active list out of sync with layer labels");
    for (std::int64_t idx : zeros) {
        int i, j, k;
        phi.unindex(idx, i, j, k);
        bool s = nonneg(pv[static_cast<std::size_t>(idx)]);
        bool crossing = false;
        const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& o : off) {
            int pi = i + o[0], pj = j + o[1], pk = k + o[2];
            if (!d.contains(pi, pj, pk)) continue;
            if (nonneg(phi(pi, pj, pk)) != s) {
                crossing = true;
                break;
            }
        }
        if (!crossing)
            throw numeric_error("layer-0 voxel without a zero crossing at linear index " +
                                std::to_string(idx));
    }
}

SparseFieldState init_from_mask(const BinaryMask& mask, const VoxelGrid* u, const BinaryMask* roi) {
    const std::int64_t n = mask.dims.count();
    std::int64_t fg = mask.count();
    if (fg == 0) throw input_error("initialization mask is empty");
    if (fg == n) throw input_error("initialization mask covers the whole grid");
    if (roi && !roi->same_geometry(mask)) throw input_error("roi shape differs from the mask");

    SparseFieldState st;
    st.phi = VoxelGrid(mask.dims, mask.spacing, mask.origin, GridKind::phi);
    st.layers.assign(static_cast<std::size_t>(n), kFarNeg);
    auto& pv = st.phi.values();

    auto in_roi = [&](std::size_t idx) { return !roi || roi->values[idx] != 0; };

    for (std::size_t v = 0; v < static_cast<std::size_t>(n); ++v) {
        bool inside = mask.values[v] != 0 && in_roi(v);
        pv[v] = inside ? kPhiCap : -kPhiCap;
        st.layers[v] = inside ? kFarPos : kFarNeg;
    }

    // City-block distance to the opposite region, capped at 3, by level-by-level BFS.
    const GridDims& d = mask.dims;
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<std::int16_t> dist(static_cast<std::size_t>(n), 0);  // 0 = unset
    std::vector<std::int64_t> frontier;
    for (std::int64_t idx = 0; idx < n; ++idx) {
        std::size_t v = static_cast<std::size_t>(idx);
        if (!in_roi(v)) continue;  // frozen background, never layered
        int i, j, k;
        st.phi.unindex(idx, i, j, k);
        bool s = pv[v] >= 0.0;
        for (const auto& o : off) {
            int pi = i + o[0], pj = j + o[1], pk = k + o[2];
            if (!d.contains(pi, pj, pk)) continue;
            if ((st.phi(pi, pj, pk) >= 0.0) != s) {
                dist[v] = 1;
                frontier.push_back(idx);
                break;
            }
        }
    }
    if (frontier.empty()) throw input_error("initialization mask has no boundary inside the roi");

    for (std::int16_t level = 2; level <= 3; ++level) {
        std::vector<std::int64_t> next;
        for (std::int64_t idx : frontier) {
            int i, j, k;
            st.phi.unindex(idx, i, j, k);
            bool s = pv[static_cast<std::size_t>(idx)] >= 0.0;
            for (const auto& o : off) {
                int pi = i + o[0], pj = j + o[1], pk = k + o[2];
                if (!d.contains(pi, pj, pk)) continue;
                std::size_t w = static_cast<std::size_t>(st.phi.index(pi, pj, pk));
                if (!in_roi(w) || dist[w] != 0) continue;
                if ((pv[w] >= 0.0) != s) continue;  // same-region growth only
                dist[w] = level;
                next.push_back(st.phi.index(pi, pj, pk));
            }
        }
        frontier = std::move(next);
        std::sort(frontier.begin(), frontier.end());
        frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
    }

    for (std::int64_t idx = 0; idx < n; ++idx) {
        std::size_t v = static_cast<std::size_t>(idx);
        if (dist[v] == 0) continue;
        double sgn = pv[v] >= 0.0 ? 1.0 : -1.0;
        pv[v] = sgn * (dist[v] - 0.5);
        st.layers[v] = static_cast<std::int8_t>(sgn * (dist[v] - 1));
        if (dist[v] == 1) st.active.push_back(idx);
    }

    if (u) {
        if (!u->same_geometry(st.phi)) throw input_error("image shape differs from the mask");
        double s1 = 0.0, s2 = 0.0;
        std::int64_t n1 = 0, n2 = 0;
        const auto& uv = u->values();
        for (std::size_t v = 0; v < uv.size(); ++v) {
            if (roi && roi->values[v] == 0) continue;
            if (pv[v] > 0.0) {
                s1 += uv[v];
                ++n1;
            } else if (pv[v] < 0.0) {
                s2 += uv[v];
                ++n2;
            }
        }
        st.c1 = n1 ? s1 / n1 : 0.0;
        st.c2 = n2 ? s2 / n2 : 0.0;
    }
    return st;
}

double smoothed_heaviside(double z) { return 0.5 * (1.0 + (2.0 / M_PI) * std::atan(z)); }

double smoothed_delta(double z) { return 1.0 / (M_PI * (1.0 + z * z)); }

double chan_vese_force(double u, double c1, double c2) {
    return (u - c1) * (u - c1) - (u - c2) * (u - c2);
}

double shape_force(double phi, double psi, double L) {
    double hl = smoothed_heaviside(L);
    return 2.0 * (smoothed_heaviside(phi) * hl - smoothed_heaviside(psi)) * hl * smoothed_delta(phi);
}

double labeling_energy(const VoxelGrid& u, const VoxelGrid& psi, double c1, double c2,
                       const BinaryMask* roi) {
    if (!u.same_geometry(psi)) throw input_error("image and prior shapes differ");
    const auto& uv = u.values();
    const auto& sv = psi.values();
    double e = 0.0;
    for (std::size_t v = 0; v < uv.size(); ++v) {
        if (roi && roi->values[v] == 0) continue;
        double h = smoothed_heaviside(sv[v]);
        e += (uv[v] - c1) * (uv[v] - c1) * h + (uv[v] - c2) * (uv[v] - c2) * (1.0 - h);
    }
    return e;
}

namespace {

// Mean curvature of phi from central differences in voxel index space,
// clamped to [-1, 1]. Border indices replicate.
double curvature_at(const VoxelGrid& phi, int i, int j, int k) {
    const GridDims& d = phi.dims();
    auto cl = [](int v, int hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };
    auto p = [&](int a, int b, int c) { return phi(cl(a, d.nx), cl(b, d.ny), cl(c, d.nz)); };
    double px = (p(i + 1, j, k) - p(i - 1, j, k)) / 2.0;
    double py = (p(i, j + 1, k) - p(i, j - 1, k)) / 2.0;
    double pz = (p(i, j, k + 1) - p(i, j, k - 1)) / 2.0;
    double pxx = p(i + 1, j, k) - 2.0 * p(i, j, k) + p(i - 1, j, k);
    double pyy = p(i, j + 1, k) - 2.0 * p(i, j, k) + p(i, j - 1, k);
    double pzz = p(i, j, k + 1) - 2.0 * p(i, j, k) + p(i, j, k - 1);
    double pxy = (p(i + 1, j + 1, k) - p(i + 1, j - 1, k) - p(i - 1, j + 1, k) + p(i - 1, j - 1, k)) / 4.0;
    double pxz = (p(i + 1, j, k + 1) - p(i + 1, j, k - 1) - p(i - 1, j, k + 1) + p(i - 1, j, k - 1)) / 4.0;
    double pyz = (p(i, j + 1, k + 1) - p(i, j + 1, k - 1) - p(i, j - 1, k + 1) + p(i, j - 1, k - 1)) / 4.0;
    double g2 = px * px + py * py + pz * pz;
    if (g2 < 1e-12) return 0.0;
    double num = pxx * (py * py + pz * pz) + pyy * (px * px + pz * pz) + pzz * (px * px + py * py) -
                 2.0 * (px * py * pxy + px * pz * pxz + py * pz * pyz);
    double kappa = num / (g2 * std::sqrt(g2));
    return std::clamp(kappa, -1.0, 1.0);
}

} // namespace

void evolve(SparseFieldState& state, const VoxelGrid& u, const LevelSetParams& params) {
    params.validate();
    if (!u.same_geometry(state.phi)) throw input_error("image shape differs from the level-set state");
    if (params.roi && !params.roi->same_geometry(state.phi))
        throw input_error("roi shape differs from the level-set state");
    if (params.prior && !params.prior->same_geometry(state.phi))
        throw input_error("prior shape differs from the level-set state");
    if (params.labeling && !params.labeling->same_geometry(state.phi))
        throw input_error("labeling shape differs from the level-set state");

    const GridDims& d = state.phi.dims();
    const std::int64_t n = state.phi.size();
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    auto& pv = state.phi.values();
    const auto& uv = u.values();
    auto in_roi = [&](std::size_t v) { return !params.roi || params.roi->values[v] != 0; };

    std::vector<double> force(state.active.size());
    std::vector<double> delta(state.active.size());

    for (int it = 0; it < params.iterations; ++it) {
        if (state.active.empty())
            throw numeric_error("contour vanished at iteration " + std::to_string(state.iteration));
        force.resize(state.active.size());
        delta.resize(state.active.size());

        // Region means under the ideal Heaviside, restricted to the ROI.
        double s1 = 0.0, s2 = 0.0;
        std::int64_t n1 = 0, n2 = 0;
        for (std::size_t v = 0; v < static_cast<std::size_t>(n); ++v) {
            if (!in_roi(v)) continue;
            if (pv[v] > 0.0) {
                s1 += uv[v];
                ++n1;
            } else if (pv[v] < 0.0) {
                s2 += uv[v];
                ++n2;
            }
        }
        if (n1 == 0 || n2 == 0)
            throw numeric_error("contour vanished at iteration " + std::to_string(state.iteration) +
                                ": one side of the contour is empty");
        state.c1 = s1 / n1;
        state.c2 = s2 / n2;

        // Data force on the active set, normalized by its own maximum.
        parallel_ranges(static_cast<std::int64_t>(state.active.size()),
                        [&](std::int64_t begin, std::int64_t end) {
                            for (std::int64_t a = begin; a < end; ++a) {
                                std::size_t v = static_cast<std::size_t>(state.active[a]);
                                force[a] = chan_vese_force(uv[v], state.c1, state.c2);
                            }
                        });
        double fmax = 0.0;
        for (double f : force) fmax = std::max(fmax, std::abs(f));
        const double fscale = fmax > 0.0 ? 1.0 / fmax : 0.0;

        parallel_ranges(static_cast<std::int64_t>(state.active.size()),
                        [&](std::int64_t begin, std::int64_t end) {
                            for (std::int64_t a = begin; a < end; ++a) {
                                std::int64_t idx = state.active[a];
                                std::size_t v = static_cast<std::size_t>(idx);
                                int i, j, k;
                                state.phi.unindex(idx, i, j, k);
                                double f = -params.data_weight * force[a] * fscale;
                                if (params.shape_weight > 0.0) {
                                    double psi = params.prior->values()[v];
                                    double lab = params.labeling ? params.labeling->values()[v] : 1e9;
                                    f -= params.shape_weight * shape_force(pv[v], psi, lab);
                                }
                                f += params.curvature_factor * curvature_at(state.phi, i, j, k);
                                delta[a] = std::clamp(params.time_step * f, -kMaxStep, kMaxStep);
                            }
                        });

        for (std::size_t a = 0; a < state.active.size(); ++a) {
            std::size_t v = static_cast<std::size_t>(state.active[a]);
            double np = std::clamp(pv[v] + delta[a], -kPhiCap, kPhiCap);
            if (!std::isfinite(np))
                throw numeric_error("non-finite phi at iteration " + std::to_string(state.iteration));
            pv[v] = np;
        }

        // Relayer: candidates are the old band plus layer-0 neighbors.
        std::vector<std::int64_t> cand;
        for (std::int64_t idx = 0; idx < n; ++idx)
            if (std::abs(state.layers[static_cast<std::size_t>(idx)]) <= 2) cand.push_back(idx);
        std::size_t band_count = cand.size();
        for (std::size_t a = 0; a < band_count; ++a) {
            if (state.layers[static_cast<std::size_t>(cand[a])] != 0) continue;
            int i, j, k;
            state.phi.unindex(cand[a], i, j, k);
            for (const auto& o : off) {
                int pi = i + o[0], pj = j + o[1], pk = k + o[2];
                if (d.contains(pi, pj, pk)) cand.push_back(state.phi.index(pi, pj, pk));
            }
        }
        std::sort(cand.begin(), cand.end());
        cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

        std::vector<std::int8_t> newlab(cand.size(), kFarPos);
        auto lab_of = [&](std::int64_t idx) -> std::int8_t* {
            auto it = std::lower_bound(cand.begin(), cand.end(), idx);
            if (it == cand.end() || *it != idx) return nullptr;
            return &newlab[static_cast<std::size_t>(it - cand.begin())];
        };

        std::vector<std::int64_t> l0;
        for (std::size_t a = 0; a < cand.size(); ++a) {
            std::size_t v = static_cast<std::size_t>(cand[a]);
            newlab[a] = pv[v] >= 0.0 ? kFarPos : kFarNeg;
            if (!in_roi(v)) continue;
            int i, j, k;
            state.phi.unindex(cand[a], i, j, k);
            bool s = nonneg(pv[v]);
            for (const auto& o : off) {
                int pi = i + o[0], pj = j + o[1], pk = k + o[2];
                if (!d.contains(pi, pj, pk)) continue;
                if (nonneg(state.phi(pi, pj, pk)) != s) {
                    newlab[a] = 0;
                    l0.push_back(cand[a]);
                    break;
                }
            }
        }
        if (l0.empty())
            throw numeric_error("contour vanished at iteration " + std::to_string(state.iteration));

        for (std::int64_t idx : l0) {
            std::size_t v = static_cast<std::size_t>(idx);
            pv[v] = std::clamp(pv[v], -kL0Cap, kL0Cap);
        }

        // Shells: each next layer takes the extreme neighbor value +/- 1.
        std::vector<std::int64_t> prev = l0;
        for (int shell = 1; shell <= 2; ++shell) {
            std::vector<std::int64_t> cur;
            for (std::int64_t idx : prev) {
                int i, j, k;
                state.phi.unindex(idx, i, j, k);
                for (const auto& o : off) {
                    int pi = i + o[0], pj = j + o[1], pk = k + o[2];
                    if (!d.contains(pi, pj, pk)) continue;
                    std::int64_t widx = state.phi.index(pi, pj, pk);
                    std::size_t w = static_cast<std::size_t>(widx);
                    if (!in_roi(w)) continue;
                    std::int8_t* lw = lab_of(widx);
                    if (!lw || *lw == 0 || std::abs(*lw) == shell) continue;
                    if (std::abs(*lw) < 3 && std::abs(*lw) < shell) continue;  // already a closer shell
                    if (std::abs(*lw) == 3) {
                        *lw = static_cast<std::int8_t>(pv[w] >= 0.0 ? shell : -shell);
                        cur.push_back(widx);
                    }
                }
            }
            std::sort(cur.begin(), cur.end());
            cur.erase(std::unique(cur.begin(), cur.end()), cur.end());
            // Assign shell phi from the extreme neighbor of the previous layer.
            for (std::int64_t idx : cur) {
                std::size_t v = static_cast<std::size_t>(idx);
                int i, j, k;
                state.phi.unindex(idx, i, j, k);
                bool pos = pv[v] >= 0.0;
                double ext = pos ? -kPhiCap : kPhiCap;
                bool found = false;
                for (const auto& o : off) {
                    int pi = i + o[0], pj = j + o[1], pk = k + o[2];
                    if (!d.contains(pi, pj, pk)) continue;
                    std::int64_t widx = state.phi.index(pi, pj, pk);
                    std::int8_t* lw = lab_of(widx);
                    if (!lw || std::abs(*lw) != shell - 1) continue;
                    double wphi = pv[static_cast<std::size_t>(widx)];
                    if ((wphi >= 0.0) != pos) continue;
                    found = true;
                    ext = pos ? std::max(ext, wphi) : std::min(ext, wphi);
                }
                if (found) pv[v] = std::clamp(pos ? ext + 1.0 : ext - 1.0, -kPhiCap, kPhiCap);
            }
            prev = std::move(cur);
        }

        // Commit labels; demoted voxels return to far with the cap value.
        for (std::size_t a = 0; a < cand.size(); ++a) {
            std::size_t v = static_cast<std::size_t>(cand[a]);
            if (!in_roi(v)) continue;
            state.layers[v] = newlab[a];
            if (std::abs(newlab[a]) == 3) pv[v] = newlab[a] > 0 ? kPhiCap : -kPhiCap;
        }
        state.active = std::move(l0);
        ++state.iteration;

        if (params.energy_trace) params.energy_trace->push_back(total_energy(state, u, params));
    }

    // Refresh the means so the final state is self-consistent.
    double s1 = 0.0, s2 = 0.0;
    std::int64_t n1 = 0, n2 = 0;
    for (std::size_t v = 0; v < static_cast<std::size_t>(n); ++v) {
        if (!in_roi(v)) continue;
        if (pv[v] > 0.0) {
            s1 += uv[v];
            ++n1;
        } else if (pv[v] < 0.0) {
            s2 += uv[v];
            ++n2;
        }
    }
    if (n1) state.c1 = s1 / n1;
    if (n2) state.c2 = s2 / n2;
}

double total_energy(const SparseFieldState& state, const VoxelGrid& u,
                    const LevelSetParams& params) {
    if (!u.same_geometry(state.phi)) throw input_error("image shape differs from the level-set state");
    const auto& pv = state.phi.values();
    const auto& uv = u.values();
    auto in_roi = [&](std::size_t v) { return !params.roi || params.roi->values[v] != 0; };

    double e_data = 0.0;
    for (std::size_t v = 0; v < uv.size(); ++v) {
        if (!in_roi(v)) continue;
        if (pv[v] > 0.0)
            e_data += (uv[v] - state.c1) * (uv[v] - state.c1);
        else
            e_data += (uv[v] - state.c2) * (uv[v] - state.c2);
    }
    double e = params.data_weight * e_data;

    if (params.prior) {
        const auto& sv = params.prior->values();
        double e_shape = 0.0;
        for (std::size_t v = 0; v < uv.size(); ++v) {
            if (!in_roi(v)) continue;
            double hl = params.labeling ? smoothed_heaviside(params.labeling->values()[v]) : 1.0;
            double r = smoothed_heaviside(pv[v]) * hl - smoothed_heaviside(sv[v]);
            e_shape += r * r;
        }
        e += params.shape_weight * e_shape;
        if (params.label_weight > 0.0)
            e += params.label_weight * labeling_energy(u, *params.prior, state.c1, state.c2, params.roi);
    }
    return e;
}

BinaryMask mask_from_phi(const VoxelGrid& phi, double iso) {
    BinaryMask m = BinaryMask::like(phi);
    const auto& pv = phi.values();
    for (std::size_t v = 0; v < pv.size(); ++v) m.values[v] = pv[v] > iso ? 1 : 0;
    return m;
}

} // namespace corseg
