//! Desk-scale tomography test problems: the Shepp-Logan phantom, a
//! parallel-beam projection matrix with exact ray-pixel intersection
//! lengths, and relative-level Gaussian noise injection.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::sparse::SparseMatrix;
use crate::{tf, Error, Result, Scalar};

/// Parallel-beam scan geometry over a square pixel grid of unit pixels
/// centered at the origin.
#[derive(Debug, Clone)]
pub struct ParallelGeometry<T> {
    /// Pixels per image side; the image has `image_size²` unknowns.
    pub image_size: usize,
    pub n_views: usize,
    /// View angles in degrees, uniform over [0, 180).
    pub angles: Vec<T>,
    /// Rays per view, symmetric about the center.
    pub n_rays: usize,
    /// Perpendicular ray spacing in pixel units.
    pub detector_spacing: T,
}

impl<T: Scalar> ParallelGeometry<T> {
    pub fn new(
        image_size: usize,
        n_views: usize,
        n_rays: usize,
        detector_spacing: T,
    ) -> Result<Self> {
        if image_size == 0 || n_views == 0 || n_rays == 0 {
            return Err(Error::InvalidParameter(
                "geometry dimensions must be positive".into(),
            ));
        }
        if detector_spacing <= T::zero() {
            return Err(Error::InvalidParameter("detector spacing must be > 0".into()));
        }
        let step = tf::<T>(180.0) / T::from_usize(n_views).unwrap();
        let angles = (0..n_views)
            .map(|i| step * T::from_usize(i).unwrap())
            .collect();
        Ok(Self {
            image_size,
            n_views,
            angles,
            n_rays,
            detector_spacing,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_views * self.n_rays
    }

    pub fn n_cols(&self) -> usize {
        self.image_size * self.image_size
    }

    /// Perpendicular offset of ray `j` of a view.
    pub fn offset(&self, j: usize) -> T {
        let center = (T::from_usize(self.n_rays).unwrap() - T::one()) / tf::<T>(2.0);
        (T::from_usize(j).unwrap() - center) * self.detector_spacing
    }
}

/// A rasterized image together with its side length.
#[derive(Debug, Clone)]
pub struct Phantom<T> {
    pub n: usize,
    /// Row-major pixel intensities, length `n²`.
    pub image: Vec<T>,
}

/// (intensity, semi-axis a, semi-axis b, center x, center y, rotation deg)
const SHEPP_LOGAN_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.8740, 0.0, -0.0184, 0.0),
    (-0.2, 0.1100, 0.3100, 0.22, 0.0, -18.0),
    (-0.2, 0.1600, 0.4100, -0.22, 0.0, 18.0),
    (0.1, 0.2100, 0.2500, 0.0, 0.35, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, 0.1, 0.0),
    (0.1, 0.0460, 0.0460, 0.0, -0.1, 0.0),
    (0.1, 0.0460, 0.0230, -0.08, -0.605, 0.0),
    (0.1, 0.0230, 0.0230, 0.0, -0.606, 0.0),
    (0.1, 0.0230, 0.0460, 0.06, -0.605, 0.0),
];

/// Sum of ellipse intensities at a point of [−1,1]² — the phantom's exact
/// value before rasterization.
pub fn shepp_logan_value<T: Scalar>(x: T, y: T) -> T {
    let mut v = T::zero();
    for &(intensity, a, b, cx, cy, phi_deg) in &SHEPP_LOGAN_ELLIPSES {
        let phi = tf::<T>(phi_deg.to_radians());
        let (s, c) = (phi.sin(), phi.cos());
        let dx = x - tf::<T>(cx);
        let dy = y - tf::<T>(cy);
        let xr = dx * c + dy * s;
        let yr = -dx * s + dy * c;
        let fa = xr / tf::<T>(a);
        let fb = yr / tf::<T>(b);
        if fa * fa + fb * fb <= T::one() {
            v += tf::<T>(intensity);
        }
    }
    v
}

/// Rasterizes the ten-ellipse head phantom on an n×n grid by center-point
/// membership, clamping to [0, 1] so the image lies in the box constraint
/// set used by the experiments.
pub fn shepp_logan<T: Scalar>(n_pix: usize) -> Result<Phantom<T>> {
    if n_pix < 8 {
        return Err(Error::InvalidParameter(format!(
            "phantom size {n_pix} below the minimum 8"
        )));
    }
    let n = T::from_usize(n_pix).unwrap();
    let two = tf::<T>(2.0);
    let half = tf::<T>(0.5);
    let mut image = Vec::with_capacity(n_pix * n_pix);
    for i in 0..n_pix {
        for j in 0..n_pix {
            let x = (T::from_usize(j).unwrap() + half) * two / n - T::one();
            let y = T::one() - (T::from_usize(i).unwrap() + half) * two / n;
            let v = shepp_logan_value(x, y);
            image.push(v.max(T::zero()).min(T::one()));
        }
    }
    Ok(Phantom { n: n_pix, image })
}

/// Builds the parallel-beam projection matrix: one row per (view, ray),
/// entry (row, pixel) = exact Euclidean length of the ray's intersection
/// with that pixel. Rays that miss the grid leave empty rows.
pub fn build_projection_matrix<T: Scalar>(geom: &ParallelGeometry<T>) -> Result<SparseMatrix<T>> {
    let n = geom.image_size;
    let half = T::from_usize(n).unwrap() / tf::<T>(2.0);
    let mut triplets: Vec<(usize, usize, T)> = Vec::new();
    for (view, &angle) in geom.angles.iter().enumerate() {
        let phi = angle * tf::<T>(std::f64::consts::PI / 180.0);
        let (s, c) = (phi.sin(), phi.cos());
        for j in 0..geom.n_rays {
            let o = geom.offset(j);
            let row = view * geom.n_rays + j;
            // ray p(t) = o·(−sin φ, cos φ) + t·(cos φ, sin φ)
            let (ox, oy) = (-o * s, o * c);
            trace_ray(n, half, ox, oy, c, s, |col, len| {
                triplets.push((row, col, len));
            });
        }
    }
    SparseMatrix::from_triplets(&triplets, geom.n_rows(), geom.n_cols())
}

/// Walks one ray through the unit-pixel grid [−half, half]², reporting
/// (pixel column index, intersection length) for every pixel crossed.
fn trace_ray<T: Scalar, F: FnMut(usize, T)>(
    n: usize,
    half: T,
    ox: T,
    oy: T,
    dx: T,
    dy: T,
    mut emit: F,
) {
    // clip the ray parameter to the bounding square
    let mut t0 = T::neg_infinity();
    let mut t1 = T::infinity();
    for (o, d) in [(ox, dx), (oy, dy)] {
        if d == T::zero() {
            if o < -half || o > half {
                return;
            }
        } else {
            let ta = (-half - o) / d;
            let tb = (half - o) / d;
            let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
            t0 = t0.max(lo);
            t1 = t1.min(hi);
        }
    }
    if t0 >= t1 {
        return;
    }
    // every axis-plane crossing inside (t0, t1), plus the endpoints
    let mut ts: Vec<T> = vec![t0, t1];
    for (o, d) in [(ox, dx), (oy, dy)] {
        if d == T::zero() {
            continue;
        }
        for plane in 0..=n {
            let coord = T::from_usize(plane).unwrap() - half;
            let t = (coord - o) / d;
            if t > t0 && t < t1 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let two = tf::<T>(2.0);
    for w in ts.windows(2) {
        let (ta, tb) = (w[0], w[1]);
        let len = tb - ta;
        if len <= T::zero() {
            continue;
        }
        let tm = (ta + tb) / two;
        let x = ox + tm * dx;
        let y = oy + tm * dy;
        let jf = (x + half).floor();
        let ifl = (half - y).floor();
        let (mut i, mut j) = (ifl, jf);
        // boundary-grazing midpoints clamp into the grid
        let max_idx = T::from_usize(n - 1).unwrap();
        if i < T::zero() {
            i = T::zero();
        }
        if j < T::zero() {
            j = T::zero();
        }
        if i > max_idx {
            i = max_idx;
        }
        if j > max_idx {
            j = max_idx;
        }
        let col = i.to_usize().unwrap() * n + j.to_usize().unwrap();
        emit(col, len);
    }
}

/// The exact sinogram b̄ = A x*.
pub fn make_sinogram<T: Scalar>(a: &SparseMatrix<T>, phantom: &Phantom<T>) -> Result<Vec<T>> {
    a.matvec(&phantom.image)
}

/// Adds Gaussian noise of exact relative level: δb = level·‖b‖·e/‖e‖ with
/// e standard normal from `seed`. Returns (b + δb, δb).
pub fn add_noise<T: Scalar>(b: &[T], level: T, seed: u64) -> (Vec<T>, Vec<T>) {
    if level == T::zero() || b.is_empty() {
        return (b.to_vec(), vec![T::zero(); b.len()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e: Vec<T> = (0..b.len())
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            tf::<T>(v)
        })
        .collect();
    let norm_b = b.iter().map(|&x| x * x).sum::<T>().sqrt();
    let norm_e = e.iter().map(|&x| x * x).sum::<T>().sqrt();
    let scale = level * norm_b / norm_e;
    let delta: Vec<T> = e.into_iter().map(|x| x * scale).collect();
    let noisy = b.iter().zip(&delta).map(|(&x, &d)| x + d).collect();
    (noisy, delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_angles_uniform() {
        let g = ParallelGeometry::<f64>::new(8, 4, 5, 1.0).unwrap();
        assert_eq!(g.angles, vec![0.0, 45.0, 90.0, 135.0]);
        assert_eq!(g.offset(2), 0.0);
        assert_eq!(g.offset(0), -2.0);
    }

    #[test]
    fn phantom_corner_zero_interior_value() {
        let p = shepp_logan::<f64>(64).unwrap();
        assert_eq!(p.image[0], 0.0);
        assert_eq!(p.image[63], 0.0);
        assert_eq!(p.image[64 * 64 - 1], 0.0);
        // interior value at the origin: head (+1.0) and brain (−0.8)
        // ellipses only
        let center = shepp_logan_value::<f64>(0.0, 0.0);
        assert!((center - 0.2).abs() < 1e-12);
        let mid = p.image[31 * 64 + 31];
        assert!((mid - 0.2).abs() < 1e-12);
    }

    #[test]
    fn phantom_in_unit_box_not_saturated() {
        let p = shepp_logan::<f64>(32).unwrap();
        assert!(p.image.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let total: f64 = p.image.iter().sum();
        assert!(total > 0.0 && total < (32 * 32) as f64);
    }

    #[test]
    fn horizontal_ray_unit_lengths() {
        // one horizontal ray across a 2×2 grid: two pixels, length 1 each
        let g = ParallelGeometry::<f64>::new(2, 1, 1, 1.0).unwrap();
        let a = build_projection_matrix(&g).unwrap();
        let (cols, vals) = a.row(0);
        assert_eq!(cols.len(), 2);
        for &v in vals {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!((vals.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        let _ = cols;
    }

    #[test]
    fn diagonal_ray_sqrt_two() {
        // 45° through the center of a single unit pixel
        let g = ParallelGeometry::<f64>::new(1, 4, 1, 1.0).unwrap();
        let a = build_projection_matrix(&g).unwrap();
        // view 1 is 45°
        let (cols, vals) = a.row(1);
        assert_eq!(cols, &[0]);
        assert!((vals[0] - 2.0_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn row_sums_match_square_chords() {
        // oracle: clip each ray against the square and compare chord lengths
        let g = ParallelGeometry::<f64>::new(9, 12, 15, 1.0).unwrap();
        let a = build_projection_matrix(&g).unwrap();
        let row_sums: Vec<f64> = (0..a.n_rows())
            .map(|r| a.row(r).1.iter().sum())
            .collect();
        let half = 4.5;
        for (view, &angle) in g.angles.iter().enumerate() {
            let phi = angle.to_radians();
            let (s, c) = (phi.sin(), phi.cos());
            for j in 0..g.n_rays {
                let o = g.offset(j);
                let (ox, oy) = (-o * s, o * c);
                let mut t0 = f64::NEG_INFINITY;
                let mut t1 = f64::INFINITY;
                let mut miss = false;
                for (org, d) in [(ox, c), (oy, s)] {
                    if d == 0.0 {
                        if org.abs() > half {
                            miss = true;
                        }
                    } else {
                        let ta = (-half - org) / d;
                        let tb = (half - org) / d;
                        t0 = t0.max(ta.min(tb));
                        t1 = t1.min(ta.max(tb));
                    }
                }
                let chord = if miss { 0.0 } else { (t1 - t0).max(0.0) };
                let got = row_sums[view * g.n_rays + j];
                assert!(
                    (got - chord).abs() < 1e-9,
                    "view {view} ray {j}: sum {got} vs chord {chord}"
                );
            }
        }
    }

    #[test]
    fn quarter_turn_symmetry() {
        // a rasterized centered disk is exactly 90°-rotation symmetric, so
        // its projections at 0° and 90° coincide ray-by-ray
        let n = 16;
        let mut image = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = j as f64 + 0.5 - n as f64 / 2.0;
                let y = n as f64 / 2.0 - i as f64 - 0.5;
                if x * x + y * y <= 36.0 {
                    image[i * n + j] = 1.0;
                }
            }
        }
        let g = ParallelGeometry::<f64>::new(n, 2, 21, 1.0).unwrap();
        let a = build_projection_matrix(&g).unwrap();
        let b = a.matvec(&image).unwrap();
        for j in 0..g.n_rays {
            assert!(
                (b[j] - b[g.n_rays + j]).abs() < 1e-9,
                "ray {j}: {} vs {}",
                b[j],
                b[g.n_rays + j]
            );
        }
    }

    #[test]
    fn mirror_symmetry() {
        // left-right symmetric image: the 135° view is the 45° view with
        // the ray order reversed
        let n = 12;
        let mut image = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let x = j as f64 + 0.5 - n as f64 / 2.0;
                let y = n as f64 / 2.0 - i as f64 - 0.5;
                if x * x + y * y <= 20.0 {
                    image[i * n + j] = 1.0 + y / 10.0; // symmetric in x only
                }
            }
        }
        let g = ParallelGeometry::<f64>::new(n, 4, 17, 1.0).unwrap();
        let a = build_projection_matrix(&g).unwrap();
        let b = a.matvec(&image).unwrap();
        let v45 = &b[g.n_rays..2 * g.n_rays];
        let v135 = &b[3 * g.n_rays..4 * g.n_rays];
        for j in 0..g.n_rays {
            assert!(
                (v45[j] - v135[g.n_rays - 1 - j]).abs() < 1e-9,
                "ray {j}: {} vs {}",
                v45[j],
                v135[g.n_rays - 1 - j]
            );
        }
    }

    #[test]
    fn entries_bounded_by_pixel_diagonal() {
        let g = ParallelGeometry::<f64>::new(7, 10, 13, 1.0).unwrap();
        let a = build_projection_matrix(&g).unwrap();
        let lim = 2.0_f64.sqrt() + 1e-12;
        for (_, _, v) in a.triplets() {
            assert!(v > 0.0 && v <= lim, "entry {v} outside (0, √2]");
        }
    }

    #[test]
    fn far_rays_miss_near_rays_may_hit() {
        let n = 4;
        let g = ParallelGeometry::<f64>::new(n, 8, 17, 1.0).unwrap();
        let a = build_projection_matrix(&g).unwrap();
        let circumradius = (n as f64 / 2.0) * 2.0_f64.sqrt();
        for view in 0..g.n_views {
            for j in 0..g.n_rays {
                let row = view * g.n_rays + j;
                if g.offset(j).abs() > circumradius {
                    assert!(a.row_is_empty(row), "far ray {row} hit the grid");
                }
                if !a.row_is_empty(row) {
                    assert!(g.offset(j).abs() <= circumradius);
                }
            }
        }
    }

    #[test]
    fn sinogram_trivial_cases() {
        let g = ParallelGeometry::<f64>::new(8, 6, 11, 1.0).unwrap();
        let a = build_projection_matrix(&g).unwrap();
        let zero = Phantom {
            n: 8,
            image: vec![0.0; 64],
        };
        assert!(make_sinogram(&a, &zero).unwrap().iter().all(|&v| v == 0.0));
        let ones = Phantom {
            n: 8,
            image: vec![1.0; 64],
        };
        let b = make_sinogram(&a, &ones).unwrap();
        for r in 0..a.n_rows() {
            let sum: f64 = a.row(r).1.iter().sum();
            assert!((b[r] - sum).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_level_exact_and_deterministic() {
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).sin() + 2.0).collect();
        let (noisy, delta) = add_noise(&b, 0.02, 77);
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nd = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((nd / nb - 0.02).abs() < 1e-12);
        for ((&x, &d), &y) in b.iter().zip(&delta).zip(&noisy) {
            assert_eq!(x + d, y);
        }
        let (noisy2, delta2) = add_noise(&b, 0.02, 77);
        assert_eq!(noisy, noisy2);
        assert_eq!(delta, delta2);
        let (same, zero) = add_noise(&b, 0.0, 77);
        assert_eq!(same, b);
        assert!(zero.iter().all(|&v| v == 0.0));
    }
}
