//! Integrals of the Laplace and Helmholtz kernels over one flat triangle.
//!
//! The static (k = 0) parts are integrated in closed form; the smooth
//! dynamic remainders by a triangle rule, or in polar coordinates about the
//! centroid for the self panel.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::geometry::Vec3;
use crate::quadrature::{gauss_legendre, TRIANGLE_7};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// ∫_T 1/|x − s| dS(s) for a flat triangle with unit normal `n`
/// (vertices counter-clockwise about `n`).
pub fn laplace_single_static(x: &Vec3, tri: &[Vec3; 3], n: &Vec3) -> f64 {
    let h = (x - tri[0]).dot(n);
    let abs_h = h.abs();
    let rho = x - n * h;
    let mut sum = 0.0;
    for e in 0..3 {
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        let len = (b - a).norm();
        let l = (b - a) / len;
        let u = l.cross(n);
        let t0 = (a - rho).dot(&u);
        if t0.abs() <= 1e-14 * len {
            continue;
        }
        let sm = (a - rho).dot(&l);
        let sp = (b - rho).dot(&l);
        let rm = (x - a).norm();
        let rp = (x - b).norm();
        let r0sq = t0 * t0 + h * h;
        // ln(r + s), rewritten as ln(r0²/(r − s)) when s < 0 to avoid cancellation.
        let log_term = |s: f64, r: f64| {
            if s >= 0.0 {
                (r + s).ln()
            } else {
                r0sq.ln() - (r - s).ln()
            }
        };
        sum += t0 * (log_term(sp, rp) - log_term(sm, rm));
        if abs_h > 0.0 {
            sum -= abs_h * ((t0 * sp / (r0sq + abs_h * rp)).atan() - (t0 * sm / (r0sq + abs_h * rm)).atan());
        }
    }
    sum
}

/// Signed solid angle subtended by the triangle at `x`; positive when `x`
/// lies on the side opposite to the triangle's normal.
pub fn solid_angle(x: &Vec3, tri: &[Vec3; 3]) -> f64 {
    let r0 = tri[0] - x;
    let r1 = tri[1] - x;
    let r2 = tri[2] - x;
    let (n0, n1, n2) = (r0.norm(), r1.norm(), r2.norm());
    let det = r0.dot(&r1.cross(&r2));
    let denom = n0 * n1 * n2 + r0.dot(&r1) * n2 + r0.dot(&r2) * n1 + r1.dot(&r2) * n0;
    2.0 * det.atan2(denom)
}

/// (e^{iz} − 1)/z, entire; series near the origin.
pub fn expm1_over(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        let mut term = I; // m = 1: i^1 z^0 / 1!
        let mut sum = term;
        for m in 2..14 {
            term = term * I * z / m as f64;
            sum += term;
        }
        sum
    } else {
        ((I * z).exp() - 1.0) / z
    }
}

/// ((1 − iz)e^{iz} − 1)/z², entire; series near the origin.
pub fn double_layer_defect(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        // Σ_{m≥2} (1 − m) i^m z^{m−2} / m!
        let mut power = Complex64::new(1.0, 0.0); // i^m z^{m-2} / m! for m = 2 is -1/2
        let mut sum = Complex64::new(0.0, 0.0);
        let mut fact = 2.0;
        let mut ipow = -Complex64::new(1.0, 0.0); // i^2
        for m in 2..16 {
            if m > 2 {
                fact *= m as f64;
                ipow *= I;
                power *= z;
            }
            sum += ipow * power * ((1 - m as i64) as f64 / fact);
        }
        sum
    } else {
        ((1.0 - I * z) * (I * z).exp() - 1.0) / (z * z)
    }
}

/// (e^{iz} − 1 − iz)/(iz), the radial remainder of the self-panel integral.
fn radial_remainder(z: Complex64) -> Complex64 {
    if z.norm() < 0.1 {
        // Σ_{m≥2} (iz)^{m−1}/m!
        let iz = I * z;
        let mut term = iz / 2.0;
        let mut sum = term;
        for m in 3..16 {
            term = term * iz / m as f64;
            sum += term;
        }
        sum
    } else {
        let iz = I * z;
        (iz.exp() - 1.0 - iz) / iz
    }
}

/// ∫_T (e^{ik|x−s|} − 1)/|x−s| dS(s) by the seven-point rule.
pub fn single_remainder_quadrature(k: Complex64, x: &Vec3, tri: &[Vec3; 3], area: f64) -> Complex64 {
    if k == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    TRIANGLE_7
        .iter()
        .map(|(l, w)| {
            let s = tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2];
            let r = (x - s).norm();
            k * expm1_over(k * r) * *w
        })
        .sum::<Complex64>()
        * area
}

/// ∫_T (x−s)·n [(1 − ik r)e^{ikr} − 1]/r³ dS(s) by the seven-point rule.
pub fn double_remainder_quadrature(k: Complex64, x: &Vec3, tri: &[Vec3; 3], n: &Vec3, area: f64) -> Complex64 {
    if k == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    TRIANGLE_7
        .iter()
        .map(|(l, w)| {
            let s = tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2];
            let d = x - s;
            let r = d.norm();
            if r == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            k * k * double_layer_defect(k * r) * (d.dot(n) / r) * *w
        })
        .sum::<Complex64>()
        * area
}

/// ∫_T e^{ik|c−s|}/|c−s| dS(s) with `c` the centroid of `tri`.
///
/// The 1/r part is exact; the remainder is integrated in polar coordinates
/// about the centroid, exactly in r and by Gauss–Legendre in the angle.
pub fn self_single(k: Complex64, tri: &[Vec3; 3], n: &Vec3) -> Complex64 {
    let c = (tri[0] + tri[1] + tri[2]) / 3.0;
    let static_part = laplace_single_static(&c, tri, n);
    if k == Complex64::new(0.0, 0.0) {
        return Complex64::new(static_part, 0.0);
    }
    let (nodes, weights) = gauss_legendre(20);
    let mut remainder = Complex64::new(0.0, 0.0);
    for e in 0..3 {
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        let edge = b - a;
        let len = edge.norm();
        let l = edge / len;
        let foot = a + l * (c - a).dot(&l);
        let h = (foot - c).norm();
        let ta = (a - foot).dot(&l);
        let tb = (b - foot).dot(&l);
        let (psi_a, psi_b) = ((ta / h).atan(), (tb / h).atan());
        let half = 0.5 * (psi_b - psi_a);
        let mid = 0.5 * (psi_b + psi_a);
        for (x, w) in nodes.iter().zip(&weights) {
            let psi = mid + half * x;
            let rho = h / psi.cos();
            // ∫_0^ρ (e^{ikr} − 1) dr = ρ · radial_remainder(kρ)
            remainder += rho * radial_remainder(k * rho) * (w * half);
        }
    }
    static_part + remainder
}

/// Full Helmholtz kernel e^{ikr}/(4πr).
pub fn greens_value(k: Complex64, r: f64) -> Complex64 {
    (I * k * r).exp() / (4.0 * PI * r)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: recursive midpoint subdivision with the
    /// seven-point rule on each leaf.
    fn brute<F: Fn(&Vec3) -> Complex64>(f: &F, tri: &[Vec3; 3], depth: u32) -> Complex64 {
        if depth == 0 {
            let area = 0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm();
            return TRIANGLE_7
                .iter()
                .map(|(l, w)| f(&(tri[0] * l[0] + tri[1] * l[1] + tri[2] * l[2])) * *w)
                .sum::<Complex64>()
                * area;
        }
        let m01 = (tri[0] + tri[1]) / 2.0;
        let m12 = (tri[1] + tri[2]) / 2.0;
        let m20 = (tri[2] + tri[0]) / 2.0;
        [
            [tri[0], m01, m20],
            [m01, tri[1], m12],
            [m20, m12, tri[2]],
            [m01, m12, m20],
        ]
        .iter()
        .map(|t| brute(f, t, depth - 1))
        .sum()
    }

    /// Duffy oracle for a point `x` inside the triangle: three sub-triangles
    /// with apex `x`, each mapped to the unit square so that the 1/r
    /// singularity is cancelled by the Jacobian.
    fn duffy<F: Fn(&Vec3) -> Complex64>(f: &F, x: &Vec3, tri: &[Vec3; 3], order: usize) -> Complex64 {
        let (nodes, weights) = gauss_legendre(order);
        let mut sum = Complex64::new(0.0, 0.0);
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            let jac = (a - x).cross(&(b - x)).norm();
            for (u, wu) in nodes.iter().zip(&weights) {
                let u = 0.5 * (u + 1.0);
                for (v, wv) in nodes.iter().zip(&weights) {
                    let v = 0.5 * (v + 1.0);
                    let s = x + ((a - x) + (b - a) * v) * u;
                    sum += f(&s) * (u * jac * 0.25 * wu * wv);
                }
            }
        }
        sum
    }

    fn sample_triangle() -> ([Vec3; 3], Vec3) {
        let tri = [
            Vec3::new(0.1, -0.2, 0.05),
            Vec3::new(1.0, 0.1, -0.1),
            Vec3::new(0.3, 0.9, 0.2),
        ];
        let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
        (tri, n)
    }

    #[test]
    fn static_single_layer_matches_brute_force() {
        let (tri, n) = sample_triangle();
        for x in [
            Vec3::new(0.4, 0.3, 0.8),
            Vec3::new(2.0, -1.0, 0.3),
            Vec3::new(0.45, 0.25, 0.02),
            Vec3::new(-0.5, 0.4, -0.3),
        ] {
            let exact = laplace_single_static(&x, &tri, &n);
            let q = brute(&|s: &Vec3| Complex64::new(1.0 / (x - s).norm(), 0.0), &tri, 6).re;
            assert!((exact - q).abs() < 1e-6 * q.abs(), "{x:?}: {exact} vs {q}");
        }
    }

    #[test]
    fn static_single_layer_in_plane() {
        let (tri, n) = sample_triangle();
        let c = (tri[0] + tri[1] + tri[2]) / 3.0;
        let outside = tri[1] + (tri[1] - c) * 0.5;
        let inv = |x: Vec3| move |s: &Vec3| Complex64::new(1.0 / (x - s).norm(), 0.0);
        let exact = laplace_single_static(&c, &tri, &n);
        let q = duffy(&inv(c), &c, &tri, 40).re;
        assert!((exact - q).abs() < 1e-10 * q, "{exact} vs {q}");
        let exact = laplace_single_static(&outside, &tri, &n);
        let q = brute(&inv(outside), &tri, 6).re;
        assert!((exact - q).abs() < 1e-8 * q, "{exact} vs {q}");
    }

    #[test]
    fn solid_angle_matches_brute_force() {
        let (tri, n) = sample_triangle();
        for x in [Vec3::new(0.4, 0.3, 0.8), Vec3::new(0.4, 0.3, -0.6)] {
            let q = brute(
                &|s: &Vec3| {
                    let d = x - s;
                    Complex64::new(d.dot(&n) / d.norm().powi(3), 0.0)
                },
                &tri,
                6,
            )
            .re;
            assert!((solid_angle(&x, &tri) + q).abs() < 1e-8, "{x:?}");
        }
    }

    #[test]
    fn solid_angle_of_closed_surface() {
        let mesh = crate::geometry::make_sphere_mesh(1.0, 1).unwrap();
        let total: f64 = (0..mesh.panel_count())
            .map(|j| solid_angle(&Vec3::new(0.1, 0.2, -0.3), &mesh.panel_vertices(j)))
            .sum();
        assert!((total - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn series_branches_agree() {
        for dir in [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.6, -0.8),
            Complex64::new(0.0, 1.0),
        ] {
            let (inside, outside) = (dir * 0.0999999, dir * 0.1000001);
            assert!((expm1_over(inside) - expm1_over(outside)).norm() < 1e-6);
            assert!((double_layer_defect(inside) - double_layer_defect(outside)).norm() < 1e-6);
            assert!((radial_remainder(inside) - radial_remainder(outside)).norm() < 1e-6);
            let z = dir * 0.05;
            let direct = ((I * z).exp() - 1.0) / z;
            assert!((expm1_over(z) - direct).norm() < 1e-12);
            let direct = ((1.0 - I * z) * (I * z).exp() - 1.0) / (z * z);
            assert!((double_layer_defect(z) - direct).norm() < 1e-9);
        }
    }

    #[test]
    fn self_integral_matches_brute_force() {
        let (tri, n) = sample_triangle();
        let c = (tri[0] + tri[1] + tri[2]) / 3.0;
        let static_part = laplace_single_static(&c, &tri, &n);
        for k in [
            Complex64::new(0.5, 0.0),
            Complex64::new(2.0, -0.3),
            Complex64::new(0.0, 0.4),
        ] {
            let remainder = self_single(k, &tri, &n) - static_part;
            let q = duffy(
                &|s: &Vec3| {
                    let r = (c - s).norm();
                    ((I * k * r).exp() - 1.0) / r
                },
                &c,
                &tri,
                40,
            );
            assert!((remainder - q).norm() < 1e-9 * q.norm(), "k={k}: {remainder} vs {q}");
        }
        assert_eq!(self_single(Complex64::new(0.0, 0.0), &tri, &n).re, static_part);
    }
}
