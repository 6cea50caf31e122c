//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed; exits nonzero if any
//! criterion fails.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use momentspec::comparison::{
    cheeger_bound_check, faber_krahn_check, moment_comparison_report, pde_comparison_check, Preset, SphereChoice,
};
use momentspec::grid_solver::{
    build_domain, dirichlet_eigenpairs, moment_hierarchy_grid, ClosedSurface, GridDomain, GridField, MaskSpec,
};
use momentspec::iso_radius::{comparison_radius, isoperimetric_constant, RicciBoundInput};
use momentspec::radial_solver::{moment_hierarchy_ball, DEFAULT_RADII};
use momentspec::rearrange::{
    distribution_function, lp_mean, radial_distribution_function, spherical_symmetrization, WeightedSample,
};
use momentspec::spectral::{
    eigenvalue_bound, eigenvalue_bound_spectral, moments_from_spectrum, recover_spectrum, zeta_tail_bound,
    RecoveryStop,
};
use momentspec::{GeodesicBall, ModelSpace, MomentSequence, SpectralData, SpectralPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), momentspec::Error>;

/// Accumulates sub-checks of one criterion.
struct Checks {
    pass: bool,
    notes: String,
}

impl Checks {
    fn new() -> Self {
        Self { pass: true, notes: String::new() }
    }

    fn check(&mut self, ok: bool, note: impl AsRef<str>) {
        self.pass &= ok;
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        if !ok {
            self.notes.push_str("FAILED ");
        }
        self.notes.push_str(note.as_ref());
    }

    fn done(self) -> Outcome {
        Ok((self.pass, self.notes))
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn interval() -> GeodesicBall {
    GeodesicBall::new(ModelSpace::euclidean(1).unwrap(), 0.5).unwrap()
}

/// `spec*` of the unit interval: `ν = (mπ)²`, `a² = 8/(mπ)²` for odd `m`.
fn interval_spec(terms: usize) -> SpectralData {
    let pairs = (0..terms)
        .map(|i| {
            let m = (2 * i + 1) as f64;
            SpectralPair { nu: (m * PI).powi(2), a_sq: 8.0 / (m * PI).powi(2) }
        })
        .collect();
    SpectralData::new(1.0, pairs).unwrap()
}

fn sphere_cap(ntheta: usize, radius: f64) -> GridDomain {
    let s = ClosedSurface::round_sphere(1.0, ntheta, 2 * ntheta).unwrap();
    build_domain(&s, &MaskSpec::Cap { center: [0.0, 0.0], radius }).unwrap()
}

fn torus_square(n: usize) -> GridDomain {
    let t = ClosedSurface::flat_torus(1.0, 1.0, n, n).unwrap();
    build_domain(&t, &MaskSpec::Rectangle { lo: [0.0, 0.0], hi: [0.5, 0.5] }).unwrap()
}

fn c1_closed_form_moments() -> Outcome {
    let mut c = Checks::new();
    let m = moment_hierarchy_ball(&interval(), 2, DEFAULT_RADII)?;
    let (t1, t2) = (m.moments().moment(1), m.moments().moment(2));
    c.check(rel(t1, 1.0 / 12.0) <= 1e-8, format!("interval T_1 rel err {:.1e}", rel(t1, 1.0 / 12.0)));
    c.check(rel(t2, 1.0 / 60.0) <= 1e-8, format!("T_2 rel err {:.1e}", rel(t2, 1.0 / 60.0)));

    let disc = GeodesicBall::new(ModelSpace::euclidean(2)?, 1.0)?;
    let t1 = moment_hierarchy_ball(&disc, 1, DEFAULT_RADII)?.moments().moment(1);
    c.check(rel(t1, PI / 8.0) <= 1e-7, format!("disc T_1 rel err {:.1e}", rel(t1, PI / 8.0)));

    let hemi = GeodesicBall::new(ModelSpace::sphere(1.0, 2)?, PI / 2.0)?;
    let exact = 2.0 * PI * (2.0 * LN_2 - 1.0);
    let t1 = moment_hierarchy_ball(&hemi, 1, DEFAULT_RADII)?.moments().moment(1);
    c.check(rel(t1, exact) <= 1e-6, format!("hemisphere T_1 rel err {:.1e}", rel(t1, exact)));
    c.done()
}

fn c2_zeta_identity() -> Outcome {
    let mut c = Checks::new();
    let spec = interval_spec(10);
    let from_spec = moments_from_spectrum(&spec, 8)?;
    let radial = moment_hierarchy_ball(&interval(), 8, DEFAULT_RADII)?;
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        let t = radial.moments().moment(n);
        let gap = t - from_spec.moment(n);
        // the truncated series can only fall short, by at most the tail bound
        let allowed = 1e-6 * t + zeta_tail_bound(&spec, n);
        worst = worst.max(gap.abs() / t);
        c.check(gap >= -1e-6 * t && gap <= allowed, format!("n={n} gap {:.2e} (allowed {:.2e})", gap / t, allowed / t));
    }
    c.check(worst.is_finite(), format!("max relative gap {worst:.2e}"));
    c.done()
}

fn c3_eigenvalue_bounds() -> Outcome {
    let mut c = Checks::new();
    let pi2 = PI * PI;
    let none = SpectralData::new(1.0, vec![])?;
    let radial = moment_hierarchy_ball(&interval(), 12, DEFAULT_RADII)?;
    let b11 = eigenvalue_bound(radial.moments(), &none, 1, 1)?.bound.unwrap_or(f64::NAN);
    c.check((b11 - 10.0).abs() <= 1e-9 && b11 >= pi2, format!("(n,k)=(1,1) bound {b11:.12}"));

    let moment_route: Vec<f64> = (1..=6)
        .map(|k| eigenvalue_bound(radial.moments(), &none, 1, k).map(|r| r.bound.unwrap_or(f64::NAN)))
        .collect::<Result<_, _>>()?;
    c.check(
        moment_route.windows(2).all(|w| w[1] < w[0]) && moment_route.iter().all(|b| *b >= pi2 * (1.0 - 1e-12)),
        "moment-route bounds decrease in k and stay above π²",
    );

    let spec = interval_spec(1000);
    let tail_route: Vec<f64> = (1..=6)
        .map(|k| eigenvalue_bound_spectral(&spec, 0.0, 1, k).map(|r| r.bound.unwrap_or(f64::NAN)))
        .collect::<Result<_, _>>()?;
    c.check(tail_route.windows(2).all(|w| w[1] < w[0]), "spectral-tail bounds decrease in k");
    c.check(rel(tail_route[5], pi2) <= 1e-4, format!("k=6 tail bound rel err {:.1e}", rel(tail_route[5], pi2)));

    // T_11/11! - a_1²ν_1^{-11} cancels about eleven digits, so the n=3
    // path needs the finer radial grid
    let known = SpectralData::new(1.0, vec![SpectralPair { nu: pi2, a_sq: 8.0 / pi2 }])?;
    let coarse = eigenvalue_bound(radial.moments(), &known, 3, 6)?.bound.unwrap_or(f64::NAN);
    let fine = moment_hierarchy_ball(&interval(), 12, 4 * DEFAULT_RADII)?;
    let n3: Vec<f64> = (1..=6)
        .map(|k| eigenvalue_bound(fine.moments(), &known, 3, k).map(|r| r.bound.unwrap_or(f64::NAN)))
        .collect::<Result<_, _>>()?;
    c.check(
        rel(n3[5], 9.0 * pi2) <= 1e-2,
        format!(
            "n=3 k=6 bound/9π² = {:.5} at {} radii ({:.5} at {})",
            n3[5] / (9.0 * pi2),
            4 * DEFAULT_RADII,
            coarse / (9.0 * pi2),
            DEFAULT_RADII
        ),
    );
    c.done()
}

fn c4_recovery() -> Outcome {
    let mut c = Checks::new();
    let pi2 = PI * PI;
    let radial = moment_hierarchy_ball(&interval(), 24, DEFAULT_RADII)?;
    let rec = recover_spectrum(radial.moments(), 2)?;
    let p = rec.spectrum.pairs();
    c.check(p.len() == 2, format!("{} pairs recovered", p.len()));
    if p.len() == 2 {
        c.check(rel(p[0].nu, pi2) <= 5e-3, format!("ν_1 rel err {:.1e}", rel(p[0].nu, pi2)));
        c.check(rel(p[0].a_sq, 8.0 / pi2) <= 1e-2, format!("a²_1 rel err {:.1e}", rel(p[0].a_sq, 8.0 / pi2)));
        c.check(rel(p[1].nu, 9.0 * pi2) <= 5e-2, format!("ν_2 rel err {:.1e}", rel(p[1].nu, 9.0 * pi2)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let noise: Vec<f64> = (0..24).map(|_| rng.gen_range(-1e-12..1e-12)).collect();
    let noisy = recover_spectrum(&radial.moments().perturbed(&noise)?, 6)?;
    let stopped = matches!(noisy.stop, RecoveryStop::NoiseFloor { .. });
    c.check(
        stopped && noisy.spectrum.len() < 3,
        format!("1e-12 noise: {} pairs, stop {:?}", noisy.spectrum.len(), noisy.stop),
    );
    c.done()
}

fn c5_radii() -> Outcome {
    let mut c = Checks::new();
    let r = comparison_radius(&RicciBoundInput::new(1.0, 2, PI)?)?;
    c.check((r - 1.0).abs() <= 1e-12, format!("R(1,2,π) - 1 = {:.1e}", r - 1.0));
    let r = comparison_radius(&RicciBoundInput::new(0.0, 2, 1.0)?)?;
    let exact = 1.0 / (5f64.sqrt() - 1.0);
    c.check((r - exact).abs() <= 1e-10, format!("R(0,2,1) = {r:.12}"));
    // d = 2: x solves (cosh z - 1) x² + sinh z · x = 2
    let (a, b) = (1f64.cosh() - 1.0, 1f64.sinh());
    let quadratic = (-b + (b * b + 8.0 * a).sqrt()) / (2.0 * a);
    let x = isoperimetric_constant(1.0, 2)?;
    c.check((x - quadratic).abs() <= 1e-9, format!("C(1) = {x:.12}, closed form diff {:.1e}", x - quadratic));
    c.done()
}

fn c6_pde_comparison() -> Outcome {
    let mut c = Checks::new();
    let square = torus_square(256);
    let pc = pde_comparison_check(&square, &GridField::constant(&square, 1.0)?, SphereChoice::BbgR)?;
    c.check(
        pc.violation <= pc.budget && pc.budget <= 5e-3,
        format!("square max(u*-v) = {:.2e}, budget {:.2e}", pc.violation + 0.0, pc.budget),
    );
    let cap = sphere_cap(256, PI / 3.0);
    let pc = pde_comparison_check(&cap, &GridField::constant(&cap, 1.0)?, SphereChoice::SqrtK)?;
    let diff = pc.u_star.iter().zip(&pc.v).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    c.check(diff <= pc.budget, format!("cap max|u*-v| = {diff:.2e}, budget {:.2e}", pc.budget));
    c.done()
}

fn c7_moment_comparison() -> Outcome {
    let mut c = Checks::new();
    for preset in Preset::ALL {
        let (surface, mask, choice) = preset.setup();
        let domain = build_domain(&surface, &mask)?;
        let report = moment_comparison_report(&domain, 5, choice)?;
        let positive = report.margins.iter().all(|m| *m > 0.0);
        let min = report.margins.iter().copied().fold(f64::INFINITY, f64::min);
        c.check(report.all_pass() && positive, format!("{}: min margin {min:.2e}", preset.name()));
        if let ClosedSurface::RoundSphere { .. } = surface {
            let bbg = moment_comparison_report(&domain, 5, SphereChoice::BbgR)?;
            let ordered = bbg.margins.iter().zip(&report.margins).all(|(b, s)| *b <= *s + 1e-12 * s.abs().max(1e-300));
            c.check(ordered, format!("{}: bbg_R margins ≤ sqrtK margins", preset.name()));
        }
    }
    let cap = sphere_cap(256, PI / 3.0);
    let report = moment_comparison_report(&cap, 5, SphereChoice::SqrtK)?;
    let within = report.margins.iter().zip(&report.budgets).all(|(m, b)| m.abs() <= *b);
    let worst = report.margins.iter().zip(&report.budgets).map(|(m, b)| m.abs() / b).fold(0.0, f64::max);
    c.check(within, format!("cap π/3 equality: max |margin|/budget {worst:.2}"));
    c.done()
}

/// Checks `k = 1, 2, 3` and records the slacks.
fn cheeger_case(c: &mut Checks, name: &str, cheeger: f64, vol: f64, vol_m: f64, m: &MomentSequence) -> momentspec::Result<()> {
    let mut line = format!("{name}: slack");
    let mut ok = true;
    for k in 1..=3 {
        let r = cheeger_bound_check(cheeger, vol, vol_m, m, k)?;
        ok &= r.holds && r.slack > 0.0;
        let _ = write!(line, " {:.3e}", r.slack);
    }
    c.check(ok, line);
    Ok(())
}

fn c8_cheeger() -> Outcome {
    let mut c = Checks::new();
    // circle of length 1, arc of length 1/2, C = 4: k=1 gives 16 ≤ 12/a² = 48
    let arc = GeodesicBall::new(ModelSpace::euclidean(1)?, 0.25)?;
    let arc_m = moment_hierarchy_ball(&arc, 5, DEFAULT_RADII)?;
    let rhs1 = cheeger_bound_check(4.0, 0.5, 1.0, arc_m.moments(), 1)?.rhs;
    c.check(rel(rhs1, 48.0) <= 1e-8, format!("arc k=1 rhs {rhs1:.10}"));
    cheeger_case(&mut c, "circle arc", 4.0, 0.5, 1.0, arc_m.moments())?;

    let cap = GeodesicBall::new(ModelSpace::sphere(1.0, 2)?, PI / 3.0)?;
    let cap_m = moment_hierarchy_ball(&cap, 5, DEFAULT_RADII)?;
    cheeger_case(&mut c, "sphere cap", 1.0, cap.volume(), 4.0 * PI, cap_m.moments())?;

    let square = torus_square(256);
    let sq_m = moment_hierarchy_grid(&square, 5)?;
    cheeger_case(&mut c, "torus square", 4.0, square.volume(), 1.0, sq_m.moments())?;
    c.done()
}

fn c9_faber_krahn() -> Outcome {
    let mut c = Checks::new();
    let hemi = sphere_cap(256, PI / 2.0);
    let fk = faber_krahn_check(&hemi, SphereChoice::SqrtK)?;
    c.check(
        (fk.lambda_domain - fk.lambda_cap).abs() <= 2e-2,
        format!("hemisphere λ_1 {:.6} vs cap {:.6}", fk.lambda_domain, fk.lambda_cap),
    );
    let fk = faber_krahn_check(&torus_square(256), SphereChoice::BbgR)?;
    c.check(
        fk.holds && fk.slack > fk.budget,
        format!(
            "square λ_1 {:.4} ≥ cap {:.4}, slack {:.3} > budget {:.2e}",
            fk.lambda_domain, fk.lambda_cap, fk.slack, fk.budget
        ),
    );
    c.done()
}

fn c10_discrete_identities() -> Outcome {
    let mut c = Checks::new();
    let torus = ClosedSurface::flat_torus(1.0, 1.0, 128, 128)?;
    let sphere = ClosedSurface::round_sphere(1.0, 64, 128)?;
    let cases = [
        ("torus disc", build_domain(&torus, &MaskSpec::Cap { center: [0.4, 0.5], radius: 0.3 })?),
        ("sphere rectangle", build_domain(&sphere, &MaskSpec::Rectangle { lo: [0.5, 0.2], hi: [2.0, 4.0] })?),
        ("polar cap", build_domain(&sphere, &MaskSpec::Cap { center: [0.0, 0.0], radius: 1.0 })?),
    ];
    for (name, domain) in &cases {
        let h = moment_hierarchy_grid(domain, 6)?;
        let s = h.moments().scaled_moments();
        let mut worst: f64 = 0.0;
        for k in 1..=3 {
            worst = worst.max(rel(h.scaled_energy(domain, k), s[2 * k - 2]));
            worst = worst.max(rel(h.scaled_l2(domain, k), s[2 * k - 1]));
        }
        c.check(worst <= 1e-9, format!("{name}: max rel err {worst:.1e}"));
    }
    c.done()
}

/// Observed orders `log2(e_h / e_{h/2})` over successive refinements.
fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect()
}

fn c11_properties() -> Outcome {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);

    // self-adjointness of L in the weighted inner product
    let torus = ClosedSurface::flat_torus(1.0, 1.5, 96, 144)?;
    let sphere = ClosedSurface::round_sphere(1.0, 64, 128)?;
    let domains = [
        build_domain(&torus, &MaskSpec::Cap { center: [0.5, 0.7], radius: 0.4 })?,
        build_domain(&sphere, &MaskSpec::Cap { center: [0.0, 0.0], radius: 2.0 })?,
        build_domain(&sphere, &MaskSpec::Rectangle { lo: [0.4, 1.0], hi: [2.5, 5.5] })?,
    ];
    let mut worst: f64 = 0.0;
    for d in &domains {
        for _ in 0..5 {
            let u: Vec<f64> = (0..d.interior_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..d.interior_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = d.weighted_dot(&d.apply_laplacian(&u), &v);
            let b = d.weighted_dot(&u, &d.apply_laplacian(&v));
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()));
        }
    }
    c.check(worst <= 1e-12, format!("self-adjointness {worst:.1e}"));

    // rearrangement: equimeasurability and L^p means
    let mut worst_dist: f64 = 0.0;
    let mut worst_lp: f64 = 0.0;
    for _ in 0..4 {
        let values: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.0..5.0)).collect();
        let weights: Vec<f64> = (0..1000).map(|_| rng.gen_range(0.5..1.5) * 1e-3).collect();
        let ambient = rng.gen_range(2.5..10.0);
        let sample = WeightedSample::new(values, weights, ambient)?;
        let space = ModelSpace::sphere(1.0, 2)?;
        let sphere_vol = space.total_volume().unwrap();
        let cap = GeodesicBall::new(space, space.cap_radius_for_volume(sample.domain_volume() / ambient * sphere_vol)?)?;
        let star = spherical_symmetrization(&sample, &cap, 10_000)?;
        let scale = ambient / sphere_vol;
        for i in 0..20 {
            let t = 5.0 * i as f64 / 20.0;
            let diff = (distribution_function(&sample, t) - scale * radial_distribution_function(&star, t)).abs();
            worst_dist = worst_dist.max(diff / sample.domain_volume());
        }
        for p in [1.0, 2.0, 4.0] {
            worst_lp = worst_lp.max(rel(lp_mean(&star, p)?, lp_mean(&sample, p)?));
        }
    }
    c.check(worst_dist <= 1e-3, format!("distribution functions {worst_dist:.1e}"));
    c.check(worst_lp <= 1e-3, format!("L^p means {worst_lp:.1e}"));

    // ball volume / cap radius round trip
    let spaces = [
        ModelSpace::sphere(1.0, 2)?,
        ModelSpace::sphere(2.5, 3)?,
        ModelSpace::sphere(0.7, 4)?,
        ModelSpace::euclidean(2)?,
        ModelSpace::euclidean(3)?,
        ModelSpace::hyperbolic(-1.0, 2)?,
        ModelSpace::hyperbolic(-0.3, 3)?,
    ];
    let mut worst: f64 = 0.0;
    for space in spaces {
        let top = if space.max_radius().is_finite() { space.max_radius() } else { 4.0 };
        for i in 1..50 {
            let r = top * i as f64 / 50.0;
            let back = space.cap_radius_for_volume(space.geodesic_ball_volume(r)?)?;
            worst = worst.max((back - r).abs() / r);
        }
    }
    c.check(worst <= 1e-10, format!("cap radius round trip {worst:.1e}"));

    // refinement order on ring-aligned polar caps
    let family = [(PI / 2.0, [32, 64, 128]), (PI / 3.0, [48, 96, 192])];
    for (radius, levels) in family {
        let ball = GeodesicBall::new(ModelSpace::sphere(1.0, 2)?, radius)?;
        let radial = moment_hierarchy_ball(&ball, 24, DEFAULT_RADII)?;
        let t1 = radial.moments().moment(1);
        let lambda = recover_spectrum(radial.moments(), 1)?.spectrum.pairs()[0].nu;
        let (mut e_t, mut e_l) = (Vec::new(), Vec::new());
        for n in levels {
            let d = sphere_cap(n, radius);
            e_t.push((moment_hierarchy_grid(&d, 1)?.moments().moment(1) - t1).abs());
            e_l.push((dirichlet_eigenpairs(&d, 1)?.eigenvalues()[0] - lambda).abs());
        }
        let (ot, ol) = (orders(&e_t), orders(&e_l));
        c.check(
            ot[1] >= 1.8 && ol[1] >= 1.8,
            format!(
                "cap {:.4}: T_1 orders {:.2}, {:.2}; λ_1 orders {:.2}, {:.2}",
                radius, ot[0], ot[1], ol[0], ol[1]
            ),
        );
    }
    c.done()
}

const CRITERIA: [(&str, fn() -> Outcome); 11] = [
    ("closed-form moments", c1_closed_form_moments),
    ("zeta identity", c2_zeta_identity),
    ("eigenvalue bounds", c3_eigenvalue_bounds),
    ("spectrum recovery", c4_recovery),
    ("comparison radii", c5_radii),
    ("pointwise PDE comparison", c6_pde_comparison),
    ("moment comparison presets", c7_moment_comparison),
    ("Cheeger bounds", c8_cheeger),
    ("Faber-Krahn ordering", c9_faber_krahn),
    ("discrete hierarchy identities", c10_discrete_identities),
    ("property suites", c11_properties),
];

fn main() -> ExitCode {
    // the libtest flags (--list, filters) are ignored; `--list` must not run
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let results: Vec<(Outcome, f64)> = std::thread::scope(|s| {
        let handles: Vec<_> = CRITERIA
            .iter()
            .map(|(_, f)| {
                s.spawn(move || {
                    let t0 = Instant::now();
                    (f(), t0.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("criterion panicked")).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), (outcome, secs))) in CRITERIA.iter().zip(results).enumerate() {
        let (ok, detail) = match outcome {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!("{} {:>2} {name} ({secs:.1}s): {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("{} of {} criteria pass", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
