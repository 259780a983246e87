//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::f64::consts::PI;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use wavegp::kernel::{GramMatrix, KernelSpec, Point3};
use wavegp::verify::{
    bump_bank, expected_second_moment, monte_carlo_pathwise, verify_field, verify_kernel_constraint, BallRule,
    BumpTestFunction, GaussianField, OperatorSpec, RuleSpec,
};
use wavegp::{fit_posterior, kirchhoff_propagate, sample_wave_field, ObservationSet, SpacetimePoint, SphereRule};
use wavegp::{WaveModel, WaveModelSpec};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn se(l: f64) -> KernelSpec {
    KernelSpec::squared_exp(l).unwrap()
}

fn wave_model(c: f64, ku: KernelSpec, kv: KernelSpec, n_theta: usize, n_phi: usize) -> WaveModel {
    WaveModel::new(WaveModelSpec { c, ku, kv, n_theta, n_phi }).unwrap()
}

fn random_point3(rng: &mut ChaCha20Rng, half: f64) -> Point3 {
    Point3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
}

// 1

fn kernel_correctness() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst_value: f64 = 0.0;
    let mut worst_deriv: f64 = 0.0;
    for i in 0..1000 {
        let l = rng.random_range(0.3..2.5);
        let s2 = rng.random_range(0.2..3.0);
        let x = random_point3(&mut rng, 2.0);
        let xp = random_point3(&mut rng, 2.0);
        let r = (x - xp).norm();
        let cases = [
            (KernelSpec::matern12(l).unwrap(), s2 * (-r / l).exp()),
            (KernelSpec::matern32(l).unwrap(), s2 * (1.0 + r / l) * (-r / l).exp()),
            (se(l), s2 * (-r * r / (2.0 * l * l)).exp()),
        ];
        for (k, direct) in cases {
            let k = k.with_variance(s2).unwrap();
            // error relative to the kernel scale k(x, x) = s2
            worst_value = worst_value.max((k.eval(&x, &xp) - direct).abs() / s2);
        }
        let k = if i % 2 == 0 { KernelSpec::matern32(l) } else { KernelSpec::squared_exp(l) }
            .unwrap()
            .with_variance(s2)
            .unwrap();
        let h = 1e-5 * l;
        let g1 = k.grad1(&x, &xp).unwrap();
        let g2 = k.grad2(&x, &xp).unwrap();
        let hess = k.cross_hessian(&x, &xp).unwrap();
        let mut fd1 = Vector3::zeros();
        let mut fd2 = Vector3::zeros();
        let mut fdh = nalgebra::Matrix3::zeros();
        for a in 0..3 {
            let e = Point3::ith(a, h);
            fd1[a] = (k.eval(&(x + e), &xp) - k.eval(&(x - e), &xp)) / (2.0 * h);
            fd2[a] = (k.eval(&x, &(xp + e)) - k.eval(&x, &(xp - e))) / (2.0 * h);
            // column a: derivative of grad1 in x'_a
            let col = (k.grad1(&x, &(xp + e)).unwrap() - k.grad1(&x, &(xp - e)).unwrap()) / (2.0 * h);
            fdh.set_column(a, &col);
        }
        worst_deriv = worst_deriv
            .max(((fd1 - g1).norm() / g1.norm().max(1e-300)).abs())
            .max(((fd2 - g2).norm() / g2.norm().max(1e-300)).abs())
            .max(((fdh - hess).norm() / hess.norm().max(1e-300)).abs());
    }
    check(
        worst_value <= 1e-14 && worst_deriv <= 1e-5,
        format!("max value err {worst_value:.2e} of scale, max derivative rel err {worst_deriv:.2e}"),
    )
}

// 2

/// Real orthonormal spherical harmonic, from the associated Legendre recurrence.
fn real_ylm(l: usize, m: i64, g: &Vector3<f64>) -> f64 {
    let ct = g[2].clamp(-1.0, 1.0);
    let st = (1.0 - ct * ct).sqrt();
    let phi = g[1].atan2(g[0]);
    let am = m.unsigned_abs() as usize;
    // P_m^m then upward in l, Condon-Shortley phase omitted (cancels in products)
    let mut pmm = 1.0;
    for i in 0..am {
        pmm *= (2 * i + 1) as f64 * st;
    }
    let plm = if l == am {
        pmm
    } else {
        let mut p0 = pmm;
        let mut p1 = ct * (2 * am + 1) as f64 * pmm;
        for ll in (am + 2)..=l {
            let p2 = ((2 * ll - 1) as f64 * ct * p1 - (ll + am - 1) as f64 * p0) / (ll - am) as f64;
            p0 = p1;
            p1 = p2;
        }
        p1
    };
    let mut ratio = 1.0;
    for k in (l - am + 1)..=(l + am) {
        ratio /= k as f64;
    }
    let n = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
    match m.cmp(&0) {
        std::cmp::Ordering::Equal => n * plm,
        std::cmp::Ordering::Greater => 2f64.sqrt() * n * plm * (am as f64 * phi).cos(),
        std::cmp::Ordering::Less => 2f64.sqrt() * n * plm * (am as f64 * phi).sin(),
    }
}

fn quadrature_exactness() -> Outcome {
    let rule = SphereRule::default_resolution();
    let deg = rule.exactness_degree();
    let harmonics: Vec<(usize, i64)> = (0..=deg).flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m))).collect();
    let mut worst: f64 = 0.0;
    for &(l, m) in &harmonics {
        // average over the sphere of Y_lm is delta_l0 / sqrt(4 pi)
        let got = rule.integrate(|g| real_ylm(l, m, g));
        let expected = if l == 0 { 1.0 / (4.0 * PI).sqrt() } else { 0.0 };
        worst = worst.max((got - expected).abs());
    }
    // orthonormality for products within the exactness degree
    let mut worst_ortho: f64 = 0.0;
    for &(l1, m1) in &harmonics {
        for &(l2, m2) in &harmonics {
            if l1 + l2 > deg || (l1, m1) > (l2, m2) {
                continue;
            }
            let got = 4.0 * PI * rule.integrate(|g| real_ylm(l1, m1, g) * real_ylm(l2, m2, g));
            let expected = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
            worst_ortho = worst_ortho.max((got - expected).abs());
        }
    }
    let third = rule.integrate(|g| g[2] * g[2]);
    let e_third = (third - 1.0 / 3.0).abs();
    check(
        worst <= 1e-12 && worst_ortho <= 1e-12 && e_third <= 1e-12,
        format!("degree {deg}: Y_lm err {worst:.1e}, products err {worst_ortho:.1e}, (g.e_z)^2 err {e_third:.1e}"),
    )
}

// 3

fn kirchhoff_plane_wave() -> Outcome {
    let rule = SphereRule::default_resolution();
    let kappa = Vector3::new(1.1, -0.6, 0.4);
    let c = 1.0;
    let u0 = |x: &Point3| kappa.dot(x).sin();
    let grad = |x: &Point3| kappa * kappa.dot(x).cos();
    let lin = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / 4.0;
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        for j in 0..5 {
            for k in 0..5 {
                for n in 0..5 {
                    let z =
                        SpacetimePoint::new(lin(i, -1.0, 1.0), lin(j, -1.0, 1.0), lin(k, -1.0, 1.0), lin(n, 0.0, 2.0));
                    let got = kirchhoff_propagate(u0, grad, |_| 0.0, c, &rule, &z);
                    let exact = kappa.dot(&z.x).sin() * (c * kappa.norm() * z.t).cos();
                    worst = worst.max((got - exact).abs());
                }
            }
        }
    }
    check(worst <= 1e-8, format!("max abs err {worst:.2e} over 625 points"))
}

// 4

fn boundary_identities() -> Outcome {
    let ku = KernelSpec::matern32(0.6).unwrap().with_variance(1.5).unwrap();
    let kv = se(0.8);
    let m = wave_model(1.2, ku, kv, 16, 16);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut worst_t0: f64 = 0.0;
    let mut worst_fd: f64 = 0.0;
    let h = 1e-3;
    for _ in 0..20 {
        let x = random_point3(&mut rng, 1.0);
        let xp = random_point3(&mut rng, 1.0);
        let at = |t: f64, tp: f64| m.kw(&SpacetimePoint { x, t }, &SpacetimePoint { x: xp, t: tp });
        worst_t0 = worst_t0.max((at(0.0, 0.0) - ku.eval(&x, &xp)).abs());
        let fd = (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h);
        let expected = kv.eval(&x, &xp);
        worst_fd = worst_fd.max((fd - expected).abs() / expected);
    }
    check(
        worst_t0 <= 1e-12 && worst_fd <= 1e-4,
        format!("t=0 err {worst_t0:.1e}, mixed time derivative rel err {worst_fd:.1e}"),
    )
}

// 5

fn gram_psd() -> Outcome {
    let m = wave_model(1.0, se(1.0), se(0.7), 16, 16);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let pts: Vec<SpacetimePoint> = (0..40)
        .map(|_| {
            let x = random_point3(&mut rng, 1.5);
            SpacetimePoint { x, t: rng.random_range(-1.5..1.5) }
        })
        .collect();
    let g: GramMatrix = m.gram(&pts);
    let bound = -1e-8 * pts.len() as f64 * g.max_diagonal();
    let min = g.min_eigenvalue();
    check(min >= bound, format!("min eigenvalue {min:.3e}, bound {bound:.3e}"))
}

// 6

fn transport_characterization() -> Outcome {
    let op = OperatorSpec::transport2d();
    let bank = bump_bank(&[0.0, 0.0], &[1.0, 1.0], 8, 2024).unwrap();
    let anchors = vec![vec![0.0, 0.0], vec![0.5, -0.3], vec![-0.7, 0.2], vec![0.3, 0.9], vec![-0.4, -0.8]];
    let rule = RuleSpec::default_for(2);
    let tol = 1e-4;
    let invariant = KernelSpec::matern12(1.0).unwrap().transport_shift().unwrap();
    let control = KernelSpec::matern32(1.0).unwrap();
    let max = |k: &KernelSpec| {
        let r = verify_kernel_constraint(k, &op, &anchors, &bank, &rule, tol).unwrap();
        let all = r.iter().all(|x| x.pass);
        (r.iter().map(|x| x.normalized.abs()).fold(0.0, f64::max), all, r.len())
    };
    let (inv, inv_pass, n) = max(&invariant);
    let (ctl, _, _) = max(&control);
    check(
        inv_pass && n == 40 && ctl >= 100.0 * tol && ctl >= 100.0 * inv,
        format!("{n} checks: invariant max {inv:.2e}, control max {ctl:.3e}"),
    )
}

// 7

fn pathwise_characterization() -> Outcome {
    let m = wave_model(1.0, se(1.0), se(1.0), 4, 8);
    let op = OperatorSpec::dalembert(1.0).unwrap();
    let phi = BumpTestFunction::new(vec![0.0, 0.0, 0.0, 0.5], vec![0.5, 0.5, 0.5, 0.4]).unwrap();
    let rule = RuleSpec::Ball(BallRule::new(16, 3, 6).unwrap());
    let floor = expected_second_moment(&m, &op, &phi, &rule).unwrap();
    let stats = monte_carlo_pathwise(&m, &op, &phi, &rule, 200, 0x7a11).unwrap();
    let control =
        monte_carlo_pathwise(&GaussianField(KernelSpec::matern32(1.0).unwrap()), &op, &phi, &rule, 200, 0x7a11)
            .unwrap();
    let ratio = stats.second_moment / floor;
    check(
        stats.mean.abs() <= 3.0 * stats.se_mean
            && (0.1..=10.0).contains(&ratio)
            && control.second_moment >= 100.0 * stats.second_moment,
        format!(
            "mean {:.2e} (se {:.2e}), second moment {:.3e} vs floor {:.3e}, control {:.3e}",
            stats.mean, stats.se_mean, stats.second_moment, floor, control.second_moment
        ),
    )
}

// 8

fn huygens_support() -> Outcome {
    let radius = 0.5;
    let c = 1.0;
    let kv = se(0.4).truncated(Point3::zeros(), radius).unwrap();
    let m = wave_model(c, KernelSpec::constant(0.0).unwrap(), kv, 16, 16);
    let rule = SphereRule::default_resolution();
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let unit = |rng: &mut ChaCha20Rng| loop {
        let v = random_point3(rng, 1.0);
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    };
    // a sphere of radius c|t| about x misses the ball when it lies outside it
    // or encloses it
    let disjoint = |rng: &mut ChaCha20Rng, outside: bool| -> SpacetimePoint {
        let dir = unit(rng);
        let t = rng.random_range(0.2..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let a = c * f64::abs(t);
        let gap = rng.random_range(0.05..0.5);
        let dist = if outside { radius + a + gap } else { (a - radius - gap).max(0.0) };
        let (dist, t) = if !outside && dist == 0.0 { (0.0, t.signum() * (radius + gap) / c) } else { (dist, t) };
        SpacetimePoint { x: dir * dist, t }
    };
    let mut geometries = 0;
    let mut bad = Vec::new();
    for i in 0..20 {
        let z = disjoint(&mut rng, i % 2 == 0);
        let zp = disjoint(&mut rng, i % 3 != 0);
        for p in [&z, &zp] {
            let a = c * p.t.abs();
            if rule.nodes().iter().any(|g| (p.x - a * g).norm() <= radius) {
                bad.push(format!("geometry {i}: a node falls inside the support"));
            }
        }
        let v = m.kv_wave(&z, &zp);
        if v != 0.0 {
            bad.push(format!("geometry {i}: kv_wave = {v:e}"));
        }
        geometries += 1;
    }
    let hit = SpacetimePoint::new(0.4, 0.0, 0.0, 0.4);
    let control = m.kv_wave(&hit, &hit);
    if control <= 0.0 {
        bad.push(format!("intersecting control gave {control:e}"));
    }
    check(
        bad.is_empty(),
        if bad.is_empty() {
            format!("{geometries} geometries exactly zero; intersecting control {control:.3e}")
        } else {
            bad.join("; ")
        },
    )
}

// 9

fn kriging_heredity() -> Outcome {
    let m = wave_model(1.0, se(1.0), se(1.0), 6, 12);
    let obs: Vec<SpacetimePoint> = vec![
        SpacetimePoint::new(0.0, 0.0, 0.0, 0.5),
        SpacetimePoint::new(0.4, -0.2, 0.1, 0.3),
        SpacetimePoint::new(-0.3, 0.3, -0.2, 0.7),
        SpacetimePoint::new(0.2, 0.4, -0.4, 0.0),
        SpacetimePoint::new(-0.4, -0.3, 0.3, 0.9),
        SpacetimePoint::new(0.1, -0.5, -0.1, 0.6),
    ];
    let values = sample_wave_field(&m, &obs, 99).unwrap().values;
    let pts: Vec<Vec<f64>> = obs.iter().map(|p| p.to_array().to_vec()).collect();
    let post = fit_posterior(m.clone(), ObservationSet::new(pts.clone(), values.clone()).unwrap()).unwrap();
    let interp = pts.iter().zip(&values).map(|(p, v)| (post.mean(p) - v).abs()).fold(0.0, f64::max);

    let lin = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / 3.0;
    let mut excess: f64 = f64::NEG_INFINITY;
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for n in 0..4 {
                    let z =
                        SpacetimePoint::new(lin(i, -0.6, 0.6), lin(j, -0.6, 0.6), lin(k, -0.6, 0.6), lin(n, -0.2, 1.0));
                    let p = z.to_array().to_vec();
                    excess = excess.max(post.variance(&p) - m.kw(&z, &z));
                }
            }
        }
    }

    let op = OperatorSpec::dalembert(1.0).unwrap();
    let bank = bump_bank(&[0.0, 0.0, 0.0, 0.5], &[0.4, 0.4, 0.4, 0.3], 8, 909).unwrap();
    let rule = RuleSpec::default_for(4);
    let reports = verify_field(|z| post.mean(&z.to_vec()), &op, &bank, &rule, 1e-3).unwrap();
    let worst = reports.iter().map(|r| r.normalized.abs()).fold(0.0, f64::max);
    check(
        interp <= 1e-9 && excess <= 1e-10 && reports.iter().all(|r| r.pass),
        format!(
            "interpolation err {interp:.1e}, max variance excess {excess:.1e}, mean residual max {worst:.2e} ({rule})"
        ),
    )
}

// 10

fn run_cli(args: &[String]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wavegp")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

fn reproducibility() -> Outcome {
    let wave = "c=1 ku.family=squaredexp ku.lengthscale=1 kv.family=matern32 kv.lengthscale=0.7 ntheta=4 nphi=8";
    let obs = std::env::temp_dir().join(format!("wavegp-acceptance-{}.csv", std::process::id()));
    std::fs::write(&obs, "x,y,value\n0,0,1\n0.5,0.2,-0.4\n-0.3,0.6,0.8\n").map_err(|e| e.to_string())?;
    let runs = [
        "kernel-eval kernel=squaredexp kernel.lengthscale=0.5 points=0,0,0;0.3,0.1,-0.2;1,1,1".to_string(),
        "gram kernel=shiftinvariant-matern12 kernel.lengthscale=1 points=0,0;0.5,0.1;-0.2,0.7".to_string(),
        format!("wave-cov {wave} ref=0,0,0,0.5 x=-1:1:5 y=0 z=0:0.5:2 t=0:1:3"),
        format!("krige obs={} kernel=matern32 kernel.lengthscale=0.8 x=-1:1:7 y=-1:1:5", obs.display()),
        "verify op=transport2d kernel=shiftinvariant-matern12 kernel.lengthscale=1 anchors=0,0;0.5,-0.3 seed=3".to_string(),
        "mc-verify op=transport2d kernel=matern32 kernel.lengthscale=1 bump.center=0,0 bump.radii=0.6,0.4 rule=ball:12x1x32 samples=64 seed=5".to_string(),
        format!("sample {wave} seed=21 x=-1:1:4 y=0:1:2 z=0 t=0:1.5:4"),
    ];
    let mut bytes = 0;
    for run in &runs {
        let base: Vec<String> = run.split(' ').map(str::to_string).collect();
        let with = |extra: &str| {
            let mut v = base.clone();
            v.push(extra.to_string());
            v
        };
        let a = run_cli(&base)?;
        let b = run_cli(&base)?;
        let one = run_cli(&with("threads=1"))?;
        let eight = run_cli(&with("threads=8"))?;
        if a != b || a != one || a != eight {
            return Err(format!("output differs for `{}`", base[0]));
        }
        bytes += a.len();
    }
    let _ = std::fs::remove_file(&obs);
    Ok(format!("{} subcommands x 4 runs identical ({bytes} bytes per pass)", runs.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("kernel correctness", Duration::from_secs(1), kernel_correctness),
        ("sphere quadrature exactness", Duration::from_secs(1), quadrature_exactness),
        ("Kirchhoff plane-wave oracle", Duration::from_secs(10), kirchhoff_plane_wave),
        ("wave-kernel boundary identities", Duration::from_secs(30), boundary_identities),
        ("wave-kernel Gram is PSD", Duration::from_secs(120), gram_psd),
        ("transport kernel satisfies its constraint weakly", Duration::from_secs(60), transport_characterization),
        ("wave sample paths satisfy the wave equation weakly", Duration::from_secs(900), pathwise_characterization),
        ("Huygens support of truncated speed kernel", Duration::from_secs(10), huygens_support),
        ("kriging interpolation and heredity", Duration::from_secs(300), kriging_heredity),
        ("CLI reproducibility", Duration::from_secs(120), reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        if elapsed > *budget {
            pass = false;
            detail.push_str(&format!("; over the {:.0} s budget", budget.as_secs_f64()));
        }
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{:>2}] {name} ({:.2} s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
