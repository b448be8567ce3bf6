//! Symmetric quadrature rules on triangles in barycentric coordinates.

/// Quadrature rule on a triangle. Weights sum to one, so an integral over a
/// triangle `T` is `|T| * sum_q w_q f(x_q)`.
#[derive(Clone, Copy, Debug)]
pub struct QuadRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
    /// Highest total polynomial degree integrated exactly.
    pub degree: u32,
}

const A1: f64 = 0.101_286_507_323_456_34;
const B1: f64 = 0.797_426_985_353_087_3;
const A2: f64 = 0.470_142_064_105_115_1;
const B2: f64 = 0.059_715_871_789_769_82;
const W1: f64 = 0.125_939_180_544_827_14;
const W2: f64 = 0.132_394_152_788_506_2;

/// Seven-point rule of degree 5 (centroid plus two orbits of three).
pub const DEGREE5: QuadRule = QuadRule {
    points: &[
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [B1, A1, A1],
        [A1, B1, A1],
        [A1, A1, B1],
        [B2, A2, A2],
        [A2, B2, A2],
        [A2, A2, B2],
    ],
    weights: &[0.225, W1, W1, W1, W2, W2, W2],
    degree: 5,
};

/// One-point centroid rule, exact for linear functions.
pub const CENTROID: QuadRule = QuadRule {
    points: &[[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
    weights: &[1.0],
    degree: 1,
};

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Iterates `(barycentric point, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }

    /// Integral of `f` over the triangle with the given corners.
    pub fn integrate(&self, corners: &[[f64; 2]; 3], f: impl Fn([f64; 2]) -> f64) -> f64 {
        let [a, b, c] = corners;
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs();
        let sum: f64 = self
            .iter()
            .map(|(l, w)| {
                let x = [
                    l[0] * a[0] + l[1] * b[0] + l[2] * c[0],
                    l[0] * a[1] + l[1] * b[1] + l[2] * c[1],
                ];
                w * f(x)
            })
            .sum();
        area * sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `int_{ref} x^a y^b = a! b! / (a + b + 2)!`.
    fn monomial_exact(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn weights_sum_to_one() {
        for rule in [DEGREE5, CENTROID] {
            let s: f64 = rule.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            for p in rule.points {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn degree5_exact_on_monomials() {
        let reference = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let got = DEGREE5.integrate(&reference, |x| x[0].powi(a as i32) * x[1].powi(b as i32));
                let exact = monomial_exact(a, b);
                assert!(((got - exact) / exact).abs() < 1e-13, "x^{a} y^{b}: {got} vs {exact}");
            }
        }
        // Degree 6 is not integrated exactly.
        let got = DEGREE5.integrate(&reference, |x| x[0].powi(6));
        assert!((got - monomial_exact(6, 0)).abs() > 1e-8);
    }
}
