"""Ray marching with front-to-back compositing and supplementary feature output.

Per-sample opacity is corrected for step length, alpha = 1 - (1-a)^(step/step_ref)
with step_ref = min voxel spacing, so renders at different step sizes agree.
Samples are taken at the box entry point and every step_world after it (left
endpoint rule). All per-ray math runs in float64; rasters are stored float32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .camera import CameraState, generate_rays
from .errors import UsageError
from .volume import ScalarVolume, TransferFunction, _gradient_index, _sample_index


@dataclass(frozen=True)
class LightingParams:
    """Blinn-Phong terms. light_dir points from the shaded point toward the light;
    None means headlight (light at the camera)."""

    light_dir: tuple[float, float, float] | None = None
    ambient: float = 0.2
    diffuse: float = 0.7
    specular: float = 0.2
    shininess: float = 32.0


@dataclass(frozen=True)
class RayMarchConfig:
    step_world: float | None = None     # None -> 0.5 * min voxel spacing
    early_term_alpha: float = 0.99
    lighting: LightingParams | None = field(default_factory=LightingParams)
    lut_size: int = 256

    def __post_init__(self):
        if self.step_world is not None and self.step_world <= 0:
            raise UsageError(f"step_world must be > 0, got {self.step_world}")
        if not (0.9 < self.early_term_alpha <= 1.0):
            raise UsageError(
                f"early_term_alpha must lie in (0.9, 1.0], got {self.early_term_alpha}")


@dataclass
class FramePacket:
    """Per-frame rasters: color, quasi-depth, RGBA at the max-alpha point, its
    world position, and a coverage flag. All share (H, W) and are float32."""

    color: np.ndarray              # (H, W, 3) in [0,1]
    quasi_depth: np.ndarray        # (H, W, 1) normalized; 1.0 sentinel off-coverage
    max_alpha_rgba: np.ndarray     # (H, W, 4)
    max_alpha_worldpos: np.ndarray  # (H, W, 3)
    coverage: np.ndarray           # (H, W, 1) 0/1 flags

    @property
    def resolution(self) -> tuple[int, int]:
        h, w = self.color.shape[:2]
        return (w, h)


@dataclass
class RayResult:
    rgba: np.ndarray               # (4,) composited rgb + accumulated alpha
    depth: float                   # world distance to the max-alpha sample; inf if none
    max_alpha_rgba: np.ndarray     # (4,) shaded rgb + corrected alpha at that sample
    max_alpha_worldpos: np.ndarray
    coverage: bool
    n_steps: int
    samples: np.ndarray | None = None  # (n, 8): t, world xyz, shaded rgb, alpha


@njit(cache=True)
def _shade_core(gx, gy, gz, vx, vy, vz, br, bg, bb, lx, ly, lz,
                ambient, diffuse, specular, shininess):
    gn = math.sqrt(gx * gx + gy * gy + gz * gz)
    if gn < 1e-6:
        r = ambient * br
        g = ambient * bg
        b = ambient * bb
    else:
        nx_ = -gx / gn
        ny_ = -gy / gn
        nz_ = -gz / gn
        ndl = nx_ * lx + ny_ * ly + nz_ * lz
        spec = 0.0
        dif = 0.0
        if ndl > 0.0:
            dif = diffuse * ndl
            hx = lx + vx
            hy = ly + vy
            hz = lz + vz
            hn = math.sqrt(hx * hx + hy * hy + hz * hz)
            if hn > 1e-12:
                ndh = (nx_ * hx + ny_ * hy + nz_ * hz) / hn
                if ndh > 0.0:
                    spec = specular * ndh ** shininess
        r = (ambient + dif) * br + spec
        g = (ambient + dif) * bg + spec
        b = (ambient + dif) * bb + spec
    return min(max(r, 0.0), 1.0), min(max(g, 0.0), 1.0), min(max(b, 0.0), 1.0)


def shade(grad, view_dir, base_rgb, lighting: LightingParams) -> np.ndarray:
    """Blinn-Phong shade with normal = -normalize(grad); ambient-only fallback
    for vanishing gradients. view_dir points toward the viewer."""
    g = np.asarray(grad, dtype=np.float64)
    v = np.asarray(view_dir, dtype=np.float64)
    v = v / np.linalg.norm(v)
    if lighting.light_dir is None:
        l = v
    else:
        l = np.asarray(lighting.light_dir, dtype=np.float64)
        l = l / np.linalg.norm(l)
    return np.array(_shade_core(
        g[0], g[1], g[2], v[0], v[1], v[2],
        float(base_rgb[0]), float(base_rgb[1]), float(base_rgb[2]),
        l[0], l[1], l[2],
        lighting.ambient, lighting.diffuse, lighting.specular, lighting.shininess))


@njit(cache=True)
def _march_core(data, occ, vox, voy, voz, sx, sy, sz, bx0, by0, bz0, bx1, by1, bz1,
                lut, orx, ory, orz, dx, dy, dz, step, expnt, early,
                lighting_on, headlight, lx, ly, lz, ambient, diffuse, specular,
                shininess, rec):
    """March one ray. occ is the 8^3-cell macrocell transparency grid; fully
    transparent blocks are crossed with plain lattice advances (identical float
    trajectory, no sampling). Returns (r,g,b,A, t_max, mar,mag,mab,maa,
    px,py,pz, covered, n_steps, n_recorded)."""
    # slab intersection with the voxel-center hull box
    t0 = 0.0
    t1 = math.inf
    for axis in range(3):
        if axis == 0:
            o, d, lo, hi = orx, dx, bx0, bx1
        elif axis == 1:
            o, d, lo, hi = ory, dy, by0, by1
        else:
            o, d, lo, hi = orz, dz, bz0, bz1
        if abs(d) < 1e-15:
            if o < lo or o > hi:
                return (0.0, 0.0, 0.0, 0.0, math.inf, 0.0, 0.0, 0.0, 0.0,
                        0.0, 0.0, 0.0, False, 0, 0)
        else:
            ta = (lo - o) / d
            tb = (hi - o) / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    if t1 < t0:
        return (0.0, 0.0, 0.0, 0.0, math.inf, 0.0, 0.0, 0.0, 0.0,
                0.0, 0.0, 0.0, False, 0, 0)

    nx, ny, nz = data.shape
    nlut = lut.shape[0]
    record = rec.shape[0] > 0
    # advance in index space to avoid per-step divisions
    fx = (orx + t0 * dx - vox) / sx
    fy = (ory + t0 * dy - voy) / sy
    fz = (orz + t0 * dz - voz) / sz
    dfx = dx * step / sx
    dfy = dy * step / sy
    dfz = dz * step / sz

    acc_r = 0.0
    acc_g = 0.0
    acc_b = 0.0
    acc_a = 0.0
    best_a = 0.0
    best_r = 0.0
    best_g = 0.0
    best_b = 0.0
    best_t = math.inf
    best_px = 0.0
    best_py = 0.0
    best_pz = 0.0
    n_steps = 0
    n_rec = 0
    t = t0
    max_iter = int((t1 - t0) / step) + 4
    it = 0
    while t < t1 and it < max_iter:
        it += 1
        # cell indices (trunc == floor for the tiny negatives rounding can give)
        ix = int(fx)
        iy = int(fy)
        iz = int(fz)
        if ix > nx - 2:
            ix = nx - 2
        if iy > ny - 2:
            iy = ny - 2
        if iz > nz - 2:
            iz = nz - 2

        if occ[ix >> 3, iy >> 3, iz >> 3] == 0 and not record:
            # fully transparent macrocell: hop to its exit on the same lattice
            ex = 1e30
            if dfx > 1e-300:
                ex = (((ix >> 3) << 3) + 8 - fx) / dfx
            elif dfx < -1e-300:
                ex = (((ix >> 3) << 3) - fx) / dfx
            ey = 1e30
            if dfy > 1e-300:
                ey = (((iy >> 3) << 3) + 8 - fy) / dfy
            elif dfy < -1e-300:
                ey = (((iy >> 3) << 3) - fy) / dfy
            ez = 1e30
            if dfz > 1e-300:
                ez = (((iz >> 3) << 3) + 8 - fz) / dfz
            elif dfz < -1e-300:
                ez = (((iz >> 3) << 3) - fz) / dfz
            m = min(ex, min(ey, ez))
            if m > 1e9:
                m = 1e9
            k = int(m) + 1
            if k < 1:
                k = 1
            hops = 0
            while hops < k and t < t1:
                t += step
                fx += dfx
                fy += dfy
                fz += dfz
                n_steps += 1
                hops += 1
            it += hops - 1
            continue

        n_steps += 1
        tx = fx - ix
        ty = fy - iy
        tz = fz - iz
        c000 = data[ix, iy, iz]
        c100 = data[ix + 1, iy, iz]
        c010 = data[ix, iy + 1, iz]
        c110 = data[ix + 1, iy + 1, iz]
        c001 = data[ix, iy, iz + 1]
        c101 = data[ix + 1, iy, iz + 1]
        c011 = data[ix, iy + 1, iz + 1]
        c111 = data[ix + 1, iy + 1, iz + 1]
        c00 = c000 + (c100 - c000) * tx
        c10 = c010 + (c110 - c010) * tx
        c01 = c001 + (c101 - c001) * tx
        c11 = c011 + (c111 - c011) * tx
        c0 = c00 + (c10 - c00) * ty
        c1 = c01 + (c11 - c01) * ty
        val = c0 + (c1 - c0) * tz

        u = val * (nlut - 1)
        il = int(u)
        if il > nlut - 2:
            il = nlut - 2
        fu = u - il
        ca = lut[il, 3] + (lut[il + 1, 3] - lut[il, 3]) * fu
        if ca > 0.0:
            cr = lut[il, 0] + (lut[il + 1, 0] - lut[il, 0]) * fu
            cg = lut[il, 1] + (lut[il + 1, 1] - lut[il, 1]) * fu
            cb = lut[il, 2] + (lut[il + 1, 2] - lut[il, 2]) * fu
            alpha = 1.0 - (1.0 - ca) ** expnt
            if lighting_on:
                gx, gy, gz = _gradient_index(data, fx, fy, fz, sx, sy, sz)
                if headlight:
                    cr, cg, cb = _shade_core(gx, gy, gz, -dx, -dy, -dz, cr, cg, cb,
                                             -dx, -dy, -dz, ambient, diffuse,
                                             specular, shininess)
                else:
                    cr, cg, cb = _shade_core(gx, gy, gz, -dx, -dy, -dz, cr, cg, cb,
                                             lx, ly, lz, ambient, diffuse,
                                             specular, shininess)
            contrib = (1.0 - acc_a) * alpha
            acc_r += contrib * cr
            acc_g += contrib * cg
            acc_b += contrib * cb
            acc_a += contrib
            if alpha > best_a:
                best_a = alpha
                best_r = cr
                best_g = cg
                best_b = cb
                best_t = t
                best_px = vox + fx * sx
                best_py = voy + fy * sy
                best_pz = voz + fz * sz
            if record and n_rec < rec.shape[0]:
                rec[n_rec, 0] = t
                rec[n_rec, 1] = vox + fx * sx
                rec[n_rec, 2] = voy + fy * sy
                rec[n_rec, 3] = voz + fz * sz
                rec[n_rec, 4] = cr
                rec[n_rec, 5] = cg
                rec[n_rec, 6] = cb
                rec[n_rec, 7] = alpha
                n_rec += 1
            if acc_a >= early:
                break
        elif record and n_rec < rec.shape[0]:
            rec[n_rec, 0] = t
            rec[n_rec, 1] = vox + fx * sx
            rec[n_rec, 2] = voy + fy * sy
            rec[n_rec, 3] = voz + fz * sz
            rec[n_rec, 4] = lut[il, 0] + (lut[il + 1, 0] - lut[il, 0]) * fu
            rec[n_rec, 5] = lut[il, 1] + (lut[il + 1, 1] - lut[il, 1]) * fu
            rec[n_rec, 6] = lut[il, 2] + (lut[il + 1, 2] - lut[il, 2]) * fu
            rec[n_rec, 7] = 0.0
            n_rec += 1
        t += step
        fx += dfx
        fy += dfy
        fz += dfz
    covered = best_a > 0.0
    return (acc_r, acc_g, acc_b, acc_a, best_t, best_r, best_g, best_b, best_a,
            best_px, best_py, best_pz, covered, n_steps, n_rec)


@njit(cache=True, parallel=True)
def _render_kernel(data, occ, vox, voy, voz, sx, sy, sz, bx0, by0, bz0, bx1, by1, bz1,
                   lut, orx, ory, orz, dirs, step, expnt, early,
                   lighting_on, headlight, lx, ly, lz, ambient, diffuse, specular,
                   shininess, near, far,
                   color, qdepth, ma_rgba, ma_pos, coverage):
    n = dirs.shape[0]
    empty_rec = np.empty((0, 8), dtype=np.float64)
    for p in prange(n):
        (r, g, b, a, t_max, mr, mg, mb, ma, px, py, pz,
         covered, _steps, _nrec) = _march_core(
            data, occ, vox, voy, voz, sx, sy, sz, bx0, by0, bz0, bx1, by1, bz1,
            lut, orx, ory, orz, dirs[p, 0], dirs[p, 1], dirs[p, 2],
            step, expnt, early, lighting_on, headlight, lx, ly, lz,
            ambient, diffuse, specular, shininess, empty_rec)
        color[p, 0] = r
        color[p, 1] = g
        color[p, 2] = b
        ma_rgba[p, 0] = mr
        ma_rgba[p, 1] = mg
        ma_rgba[p, 2] = mb
        ma_rgba[p, 3] = ma
        ma_pos[p, 0] = px
        ma_pos[p, 1] = py
        ma_pos[p, 2] = pz
        if covered:
            d = (t_max - near) / (far - near)
            qdepth[p, 0] = min(max(d, 0.0), 1.0)
            coverage[p, 0] = 1.0
        else:
            qdepth[p, 0] = 1.0
            coverage[p, 0] = 0.0


def _block_minmax(v: ScalarVolume):
    """Per 8^3-cell-block intensity min/max; cached on the volume object."""
    cached = getattr(v, "_block_minmax_cache", None)
    if cached is not None:
        return cached
    d = v.data
    views = [d[i:, j:, k:][:d.shape[0] - 1, :d.shape[1] - 1, :d.shape[2] - 1]
             for i in (0, 1) for j in (0, 1) for k in (0, 1)]
    cmin = np.minimum.reduce(views)
    cmax = np.maximum.reduce(views)

    def reduce_blocks(c, fn):
        pad = [(0, (-n) % 8) for n in c.shape]
        c = np.pad(c, pad, mode="edge")
        gx, gy, gz = (n // 8 for n in c.shape)
        return fn(c.reshape(gx, 8, gy, 8, gz, 8), axis=(1, 3, 5))

    out = (reduce_blocks(cmin, np.min).astype(np.float64),
           reduce_blocks(cmax, np.max).astype(np.float64))
    object.__setattr__(v, "_block_minmax_cache", out)
    return out


def _occupancy(v: ScalarVolume, lut: np.ndarray) -> np.ndarray:
    """1 where a macrocell's intensity range can map to nonzero alpha."""
    bmin, bmax = _block_minmax(v)
    k = lut.shape[0] - 1
    cum = np.concatenate([[0], np.cumsum(lut[:, 3] > 0)])
    ilo = np.clip((bmin * k).astype(np.int64) - 1, 0, k)
    ihi = np.clip((bmax * k).astype(np.int64) + 2, 0, k)
    return ((cum[ihi + 1] - cum[ilo]) > 0).astype(np.uint8)


def _kernel_args(v: ScalarVolume, tf: TransferFunction, cfg: RayMarchConfig):
    step = cfg.step_world if cfg.step_world is not None else 0.5 * min(v.spacing)
    step_ref = min(v.spacing)
    lut = np.ascontiguousarray(tf.rasterize(cfg.lut_size))
    occ = _occupancy(v, lut)
    lit = cfg.lighting
    lighting_on = lit is not None
    headlight = lighting_on and lit.light_dir is None
    if lighting_on and not headlight:
        l = np.asarray(lit.light_dir, dtype=np.float64)
        l = l / np.linalg.norm(l)
    else:
        l = np.zeros(3)
    amb, dif, spec, shin = ((lit.ambient, lit.diffuse, lit.specular, lit.shininess)
                            if lighting_on else (0.0, 0.0, 0.0, 1.0))
    b0, b1 = v.bbox_min, v.bbox_max
    return (v.data, occ, *(float(x) for x in v.origin), *(float(x) for x in v.spacing),
            b0[0], b0[1], b0[2], b1[0], b1[1], b1[2], lut), \
        (step, step / step_ref, cfg.early_term_alpha, lighting_on, headlight,
         l[0], l[1], l[2], amb, dif, spec, shin)


def march_ray(v: ScalarVolume, tf: TransferFunction, ray, cfg: RayMarchConfig,
              record_samples: bool = False) -> RayResult:
    """March a single world-space ray {origin, direction} through the volume.

    With record_samples, RayResult.samples holds one row per step:
    (t, world xyz, shaded rgb, corrected alpha)."""
    origin, direction = ray
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    pre, post = _kernel_args(v, tf, cfg)
    step = post[0]
    if record_samples:
        diag = float(np.linalg.norm(v.bbox_max - v.bbox_min))
        rec = np.zeros((int(diag / step) + 4, 8), dtype=np.float64)
    else:
        rec = np.empty((0, 8), dtype=np.float64)
    (r, g, b, a, t_max, mr, mg, mb, ma, px, py, pz, covered, n_steps,
     n_rec) = _march_core(*pre, o[0], o[1], o[2], d[0], d[1], d[2], *post, rec)
    return RayResult(
        rgba=np.array([r, g, b, a]),
        depth=float(t_max) if covered else math.inf,
        max_alpha_rgba=np.array([mr, mg, mb, ma]),
        max_alpha_worldpos=np.array([px, py, pz]),
        coverage=bool(covered),
        n_steps=int(n_steps),
        samples=rec[:n_rec] if record_samples else None,
    )


def render_frame(v: ScalarVolume, tf: TransferFunction, cam: CameraState,
                 cfg: RayMarchConfig | None = None, threads: int | None = None
                 ) -> FramePacket:
    """Render a full FramePacket; pixels march independently (pixel-parallel)."""
    cfg = cfg or RayMarchConfig()
    w, h = cam.resolution
    dirs = np.ascontiguousarray(generate_rays(cam).reshape(h * w, 3))
    o = np.asarray(cam.position, dtype=np.float64)
    pre, post = _kernel_args(v, tf, cfg)
    color = np.empty((h * w, 3), dtype=np.float32)
    qdepth = np.empty((h * w, 1), dtype=np.float32)
    ma_rgba = np.empty((h * w, 4), dtype=np.float32)
    ma_pos = np.empty((h * w, 3), dtype=np.float32)
    coverage = np.empty((h * w, 1), dtype=np.float32)

    prev_threads = numba.get_num_threads()
    if threads is not None:
        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    try:
        _render_kernel(*pre, o[0], o[1], o[2], dirs, *post, cam.near, cam.far,
                       color, qdepth, ma_rgba, ma_pos, coverage)
    finally:
        if threads is not None:
            numba.set_num_threads(prev_threads)

    return FramePacket(
        color=color.reshape(h, w, 3),
        quasi_depth=qdepth.reshape(h, w, 1),
        max_alpha_rgba=ma_rgba.reshape(h, w, 4),
        max_alpha_worldpos=ma_pos.reshape(h, w, 3),
        coverage=coverage.reshape(h, w, 1),
    )
