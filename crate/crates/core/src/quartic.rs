//! Real roots of cubic and quartic polynomials in closed form.

/// Real roots of `a t^3 + b t^2 + c t + d`, `a != 0`.
pub(crate) fn cubic_real_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    // t = y - b/3: y^3 + p y + q = 0
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 + sq).cbrt();
        let v = (-q / 2.0 - sq).cbrt();
        vec![u + v + shift]
    } else if p == 0.0 {
        vec![shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let phi = arg.acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift)
            .collect()
    }
}

fn quadratic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return if b == 0.0 { vec![] } else { vec![-c / b] };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// Real roots of `a t^4 + b t^3 + c t^2 + d t + e` by Ferrari's method.
pub(crate) fn quartic_real_roots(a: f64, b: f64, c: f64, d: f64, e: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return quadratic_real_roots(c, d, e);
        }
        return cubic_real_roots(b, c, d, e);
    }
    let (b, c, d, e) = (b / a, c / a, d / a, e / a);
    // t = y - b/4: y^4 + p y^2 + q y + r = 0
    let p = c - 3.0 * b * b / 8.0;
    let q = b * b * b / 8.0 - b * c / 2.0 + d;
    let r = -3.0 * b.powi(4) / 256.0 + b * b * c / 16.0 - b * d / 4.0 + e;
    let shift = -b / 4.0;
    let mut ys = Vec::new();
    if q.abs() <= 1e-14 * (1.0 + p.abs() + r.abs()) {
        for z in quadratic_real_roots(1.0, p, r) {
            if z >= 0.0 {
                ys.push(z.sqrt());
                ys.push(-z.sqrt());
            }
        }
    } else {
        // resolvent: 8 m^3 + 8 p m^2 + (2 p^2 - 8 r) m - q^2 = 0, need m > 0
        let m = cubic_real_roots(8.0, 8.0 * p, 2.0 * p * p - 8.0 * r, -q * q)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        if !(m > 0.0) {
            return vec![];
        }
        let s = (2.0 * m).sqrt();
        ys.extend(quadratic_real_roots(1.0, s, p / 2.0 + m - q / (2.0 * s)));
        ys.extend(quadratic_real_roots(1.0, -s, p / 2.0 + m + q / (2.0 * s)));
    }
    ys.into_iter().map(|y| y + shift).collect()
}
