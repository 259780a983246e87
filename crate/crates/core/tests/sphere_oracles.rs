use wavegp::sphere::{gauss_legendre, integrate_double_sphere, SphereRule};

fn double_factorial(n: i64) -> f64 {
    if n <= 0 {
        1.0
    } else {
        n as f64 * double_factorial(n - 2)
    }
}

/// Mean of `x^a y^b z^c` over the unit sphere.
fn monomial_mean(a: u32, b: u32, c: u32) -> f64 {
    if a % 2 == 1 || b % 2 == 1 || c % 2 == 1 {
        return 0.0;
    }
    let (a, b, c) = (a as i64, b as i64, c as i64);
    double_factorial(a - 1) * double_factorial(b - 1) * double_factorial(c - 1) / double_factorial(a + b + c + 1)
}

#[test]
fn monomials_up_to_exactness_degree() {
    for (nt, np) in [(4, 8), (8, 16), (16, 16), (10, 21)] {
        let rule = SphereRule::new(nt, np).unwrap();
        let deg = rule.exactness_degree() as u32;
        for a in 0..=deg {
            for b in 0..=deg - a {
                for c in 0..=deg - a - b {
                    let got = rule.integrate(|g| g[0].powi(a as i32) * g[1].powi(b as i32) * g[2].powi(c as i32));
                    let want = monomial_mean(a, b, c);
                    assert!((got - want).abs() <= 1e-13, "{nt}x{np} x^{a} y^{b} z^{c}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn gauss_legendre_is_exact_for_polynomials() {
    for n in 1..40 {
        let (x, w) = gauss_legendre(n);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        for k in 0..2 * n {
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
            let want = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((got - want).abs() <= 1e-13, "n={n} k={k}: {got}");
        }
    }
}

#[test]
fn double_sphere_factorizes() {
    let rule = SphereRule::new(6, 12).unwrap();
    let got = integrate_double_sphere(&rule, &rule, |g, h| (g[0] * g[0]) * (1.0 + h[2] * h[2]));
    assert!((got - (1.0 / 3.0) * (4.0 / 3.0)).abs() <= 1e-14);
    // E[(γ·γ')²] = 1/3 for independent uniform directions
    let got = integrate_double_sphere(&rule, &rule, |g, h| g.dot(h).powi(2));
    assert!((got - 1.0 / 3.0).abs() <= 1e-14);
}

#[test]
fn even_azimuth_count_is_antipodal() {
    let rule = SphereRule::new(5, 8).unwrap();
    for (g, w) in rule.nodes().iter().zip(rule.weights()) {
        let i = rule.nodes().iter().position(|h| (g + h).norm() < 1e-14).expect("antipode present");
        assert!((rule.weights()[i] - w).abs() < 1e-16);
    }
}
