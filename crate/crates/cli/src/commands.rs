use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use momentspec::comparison::{
    cheeger_bound_check, faber_krahn_check, moment_comparison_report, pde_comparison_check,
    symmetrized_ball, CheegerReport, ComparisonReport, FaberKrahnReport, PdeComparison, Preset, SphereChoice,
};
use momentspec::grid_solver::io::{read_mask_file, write_field_csv};
use momentspec::grid_solver::{
    build_domain, dirichlet_eigenpairs, moment_hierarchy_grid, ClosedSurface, GridDomain, GridField, MaskSpec,
};
use momentspec::iso_radius::{comparison_radius, RicciBoundInput};
use momentspec::radial_solver::{moment_hierarchy_ball, RadialField, DEFAULT_RADII};
use momentspec::rearrange::{spherical_symmetrization, WeightedSample};
use momentspec::spectral::{eigenvalue_bound, recover_spectrum, EigenBoundReport, SpectrumRecovery};
use momentspec::{GeodesicBall, ModelSpace, MomentSequence, SpectralData, SpectralPair};
use serde::{Deserialize, Serialize};

use crate::config::{build_surface, SpaceKind, SurfaceKind};
use crate::{
    BallMomentsArgs, CliError, CompareArgs, EigBoundsArgs, Format, GridMomentsArgs, IsoRadiusArgs, SymmetrizeArgs,
};

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `value` as `name` under `out`, or prints it (JSON or `summary`)
/// when no output directory is given.
fn emit<T: Serialize>(value: &T, summary: &str, name: &str, out: Option<&Path>, format: Format) -> Result<(), CliError> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            write_json(&dir.join(name), value)?;
            print!("{summary}");
        }
        None => match format {
            Format::Json => println!("{}", serde_json::to_string_pretty(value)?),
            Format::Text => print!("{summary}"),
        },
    }
    Ok(())
}

fn moments_table(m: &MomentSequence) -> String {
    let mut s = format!("volume {}\n{:>3} {:>24}\n", m.volume(), "n", "T_n");
    for n in 1..=m.len() {
        let _ = writeln!(s, "{n:>3} {:>24.16e}", m.moment(n));
    }
    s
}

#[derive(Serialize)]
struct BallMomentsOutput {
    space: ModelSpace,
    rho: f64,
    n_radii: usize,
    moments: MomentSequence,
}

pub fn ball_moments(a: BallMomentsArgs) -> Result<(), CliError> {
    let dim = required(a.dim, "dim")?;
    let space = match required(a.space, "space")? {
        SpaceKind::Euclidean => ModelSpace::euclidean(dim)?,
        SpaceKind::Sphere => ModelSpace::sphere(a.radius.unwrap_or(1.0), dim)?,
        SpaceKind::Hyperbolic => ModelSpace::hyperbolic(a.curvature.unwrap_or(-1.0), dim)?,
    };
    let rho = required(a.rho, "rho")?;
    let count = required(a.count, "count")?;
    let n_radii = a.n_radii.unwrap_or(DEFAULT_RADII);
    let ball = GeodesicBall::new(space, rho)?;
    let hierarchy = moment_hierarchy_ball(&ball, count, n_radii)?;
    let output = BallMomentsOutput { space, rho, n_radii, moments: hierarchy.moments().clone() };
    let summary = moments_table(hierarchy.moments());
    emit(&output, &summary, "moments.json", a.out.as_deref(), a.format.unwrap_or_default())?;
    if let Some(dir) = a.out.as_deref() {
        let profiles: Vec<RadialField> = (1..=count).map(|n| hierarchy.profile(n)).collect();
        let mut w = csv::Writer::from_path(dir.join("profiles.csv")).map_err(csv_error)?;
        let mut header = vec!["r".to_string()];
        header.extend((1..=count).map(|n| format!("u_{n}")));
        w.write_record(&header).map_err(csv_error)?;
        for (i, r) in profiles[0].radii().iter().enumerate() {
            let mut row = vec![r.to_string()];
            row.extend(profiles.iter().map(|p| p.values()[i].to_string()));
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Usage(format!("csv error: {e}"))
}

/// Surface from the flags, or from the header of a mask file when the
/// surface is omitted.
fn grid_domain(
    surface: Option<SurfaceKind>,
    lx: Option<f64>,
    ly: Option<f64>,
    radius: Option<f64>,
    resolution: Option<crate::config::Resolution>,
    mask: &MaskSpec,
) -> Result<GridDomain, CliError> {
    match (surface, mask) {
        (Some(kind), _) => Ok(build_domain(&build_surface(kind, lx, ly, radius, resolution)?, mask)?),
        (None, MaskSpec::File { path }) => {
            let (surface, bits) = read_mask_file(path)?;
            Ok(GridDomain::from_mask(surface, bits)?)
        }
        (None, _) => Err(CliError::Usage("missing required option --surface".into())),
    }
}

fn describe_surface(s: &ClosedSurface) -> String {
    match *s {
        ClosedSurface::FlatTorus { lx, ly, nx, ny } => format!("flat torus {lx}x{ly} at {nx}x{ny}"),
        ClosedSurface::RoundSphere { radius, ntheta, nphi } => format!("sphere R={radius} at {ntheta}x{nphi}"),
    }
}

#[derive(Serialize)]
struct EigenOutput {
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    /// Clustered `(ν, a²)` pairs.
    spectrum: Vec<SpectralPair>,
    a_sq_sum: f64,
}

#[derive(Serialize)]
struct GridMomentsOutput {
    surface: ClosedSurface,
    interior_nodes: usize,
    components: usize,
    max_residual: f64,
    moments: MomentSequence,
    #[serde(skip_serializing_if = "Option::is_none")]
    eigen: Option<EigenOutput>,
}

pub fn grid_moments(a: GridMomentsArgs) -> Result<(), CliError> {
    let mask = required(a.mask, "mask")?.0;
    let domain = grid_domain(a.surface, a.lx, a.ly, a.radius, a.resolution, &mask)?;
    let count = required(a.count, "count")?;
    let hierarchy = moment_hierarchy_grid(&domain, count)?;
    let eigen = a.eigenpairs.map(|m| dirichlet_eigenpairs(&domain, m)).transpose()?;
    let output = GridMomentsOutput {
        surface: *domain.surface(),
        interior_nodes: domain.interior_len(),
        components: domain.components(),
        max_residual: hierarchy.max_residual(),
        moments: hierarchy.moments().clone(),
        eigen: eigen.as_ref().map(|e| EigenOutput {
            eigenvalues: e.eigenvalues().to_vec(),
            residuals: e.residuals().to_vec(),
            spectrum: e.clusters(),
            a_sq_sum: e.a_sq_sum(),
        }),
    };
    let mut summary = format!(
        "{}, {} interior nodes\n{}",
        describe_surface(domain.surface()),
        domain.interior_len(),
        moments_table(hierarchy.moments())
    );
    if let Some(e) = &eigen {
        let _ = writeln!(summary, "{:>3} {:>24} {:>10}", "k", "λ_k", "residual");
        for (k, (l, r)) in e.eigenvalues().iter().zip(e.residuals()).enumerate() {
            let _ = writeln!(summary, "{:>3} {l:>24.16e} {r:>10.2e}", k + 1);
        }
        let _ = writeln!(summary, "Σa² = {} of volume {}", e.a_sq_sum(), e.volume());
    }
    emit(&output, &summary, "moments.json", a.out.as_deref(), a.format.unwrap_or_default())?;
    if let Some(dir) = a.out.as_deref() {
        for n in 1..=count {
            let file = BufWriter::new(File::create(dir.join(format!("u_{n}.csv")))?);
            write_field_csv(&domain, &hierarchy.field(n), file)?;
        }
        if let Some(e) = &eigen {
            for (k, phi) in e.fields().iter().enumerate() {
                let file = BufWriter::new(File::create(dir.join(format!("phi_{}.csv", k + 1)))?);
                write_field_csv(&domain, phi, file)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct EigBoundsOutput {
    n: usize,
    volume: f64,
    reports: Vec<EigenBoundReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery: Option<SpectrumRecovery>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("malformed {}: {e}", path.display())))
}

pub fn eig_bounds(a: EigBoundsArgs) -> Result<(), CliError> {
    let n = required(a.index, "index")?;
    let k_min = a.k_min.unwrap_or(1);
    let moments: MomentSequence = match (&a.moments, a.preset.as_deref()) {
        (Some(path), None) => read_json(path)?,
        (None, Some("interval-bounds")) => {
            // unit interval: T_n from the radial hierarchy on (-1/2, 1/2)
            let k_max = a.k_max.unwrap_or(6);
            let ball = GeodesicBall::new(ModelSpace::euclidean(1)?, 0.5)?;
            moment_hierarchy_ball(&ball, 2 * k_max, DEFAULT_RADII)?.moments().clone()
        }
        (None, Some(other)) => return Err(CliError::Usage(format!("unknown preset {other:?}"))),
        (Some(_), Some(_)) => return Err(CliError::Usage("--moments and --preset are exclusive".into())),
        (None, None) => return Err(CliError::Usage("one of --moments or --preset is required".into())),
    };
    let k_max = a.k_max.unwrap_or(moments.len() / 2);
    if k_min == 0 || k_min > k_max {
        return Err(CliError::Usage(format!("empty k range {k_min}..={k_max}")));
    }
    let recovery = a.recover.map(|p| recover_spectrum(&moments, p)).transpose()?;
    let known: SpectralData = match (&a.spec, &recovery) {
        (Some(path), _) => read_json(path)?,
        (None, Some(r)) => SpectralData::new(moments.volume(), r.spectrum.pairs().iter().take(n - 1).copied().collect())?,
        (None, None) => SpectralData::new(moments.volume(), Vec::new())?,
    };
    let reports = (k_min..=k_max)
        .map(|k| eigenvalue_bound(&moments, &known, n, k))
        .collect::<Result<Vec<_>, _>>()?;

    let mut summary = format!("bounds for λ_{n}, subtracting {} known pairs\n{:>3} {:>24}\n", known.len(), "k", "bound");
    for r in &reports {
        match r.bound {
            Some(b) => {
                let _ = writeln!(summary, "{:>3} {b:>24.16e}", r.k);
            }
            None => {
                let _ = writeln!(summary, "{:>3} {:>24}", r.k, "vacuous");
            }
        }
    }
    if let Some(r) = &recovery {
        let _ = writeln!(summary, "recovered pairs (stop: {:?})", r.stop);
        for (p, u) in r.spectrum.pairs().iter().zip(&r.uncertainties) {
            let _ = writeln!(summary, "  ν = {:.12e} ± {:.1e}, a² = {:.12e} ± {:.1e}", p.nu, u.nu, p.a_sq, u.a_sq);
        }
    }
    let output = EigBoundsOutput { n, volume: moments.volume(), reports, recovery };
    emit(&output, &summary, "bounds.json", a.out.as_deref(), a.format.unwrap_or_default())
}

#[derive(Serialize)]
struct IsoRadiusOutput {
    curvature: f64,
    dim: usize,
    diameter: f64,
    radius: f64,
}

pub fn iso_radius(a: IsoRadiusArgs) -> Result<(), CliError> {
    let input = RicciBoundInput::new(
        required(a.curvature, "curvature")?,
        required(a.dim, "dim")?,
        required(a.diam, "diam")?,
    )?;
    let radius = comparison_radius(&input)?;
    let output = IsoRadiusOutput { curvature: input.curvature, dim: input.dim, diameter: input.diameter, radius };
    emit(&output, &format!("{radius}\n"), "", None, a.format.unwrap_or_default())
}

#[derive(Serialize)]
struct CompareOutput {
    moments: ComparisonReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pde: Option<PdeComparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    faber_krahn: Option<FaberKrahnReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cheeger: Option<Vec<CheegerReport>>,
    pass: bool,
}

pub fn compare(a: CompareArgs) -> Result<(), CliError> {
    let count = a.count.unwrap_or(5);
    let (domain, choice) = match a.preset.as_deref() {
        Some(name) => {
            let preset = Preset::from_name(name)?;
            let (surface, mask, choice) = preset.setup();
            let surface = match a.resolution {
                None => surface,
                Some(r) => match surface {
                    ClosedSurface::FlatTorus { lx, ly, .. } => ClosedSurface::flat_torus(lx, ly, r.0, r.1)?,
                    ClosedSurface::RoundSphere { radius, .. } => ClosedSurface::round_sphere(radius, r.0, r.1)?,
                },
            };
            (build_domain(&surface, &mask)?, a.sphere.map(SphereChoice::from).unwrap_or(choice))
        }
        None => {
            let mask = required(a.mask, "mask")?.0;
            let domain = grid_domain(a.surface, a.lx, a.ly, a.radius, a.resolution, &mask)?;
            (domain, SphereChoice::from(required(a.sphere, "sphere")?))
        }
    };

    let moments = moment_comparison_report(&domain, count, choice)?;
    let mut summary = moments.summary();
    let mut pass = moments.all_pass();

    let pde = if a.pde {
        let report = pde_comparison_check(&domain, &GridField::constant(&domain, 1.0)?, choice)?;
        let _ = writeln!(
            summary,
            "pde: max(u* - v) = {:.3e}, budget {:.3e}, {}",
            report.violation + 0.0,
            report.budget,
            if report.pass { "ok" } else { "FAIL" }
        );
        pass &= report.pass;
        Some(report)
    } else {
        None
    };

    let faber_krahn = if a.faber_krahn {
        let report = faber_krahn_check(&domain, choice)?;
        let _ = writeln!(
            summary,
            "faber-krahn: λ_1(Ω) = {:.8}, λ_1(cap) = {:.8}, slack {:.3e}, budget {:.3e}, {}",
            report.lambda_domain,
            report.lambda_cap,
            report.slack,
            report.budget,
            if report.holds { "ok" } else { "FAIL" }
        );
        pass &= report.holds;
        Some(report)
    } else {
        None
    };

    let cheeger = match a.cheeger {
        Some(c) => {
            let hierarchy = moment_hierarchy_grid(&domain, count)?;
            let reports = (1..=count.div_ceil(2).max(1))
                .filter(|k| 2 * k - 1 <= count)
                .map(|k| cheeger_bound_check(c, domain.volume(), domain.ambient_volume(), hierarchy.moments(), k))
                .collect::<Result<Vec<_>, _>>()?;
            for r in &reports {
                let _ = writeln!(
                    summary,
                    "cheeger k={}: C² = {:.6e} ≤ {:.6e}, {}",
                    r.k,
                    r.lhs,
                    r.rhs,
                    if r.holds { "ok" } else { "FAIL" }
                );
                pass &= r.holds;
            }
            Some(reports)
        }
        None => None,
    };

    let _ = writeln!(summary, "{}", if pass { "all checks pass" } else { "some checks FAILED" });
    let output = CompareOutput { moments, pde, faber_krahn, cheeger, pass };
    emit(&output, &summary, "compare.json", a.out.as_deref(), a.format.unwrap_or_default())?;
    if pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed)
    }
}

#[derive(Deserialize)]
struct SampleRow {
    value: f64,
    weight: f64,
}

pub fn symmetrize(a: SymmetrizeArgs) -> Result<(), CliError> {
    let input = required(a.input, "input")?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&input)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", input.display())))?;
    let (mut values, mut weights) = (Vec::new(), Vec::new());
    for row in reader.deserialize::<SampleRow>() {
        let row = row.map_err(|e| CliError::Usage(format!("malformed {}: {e}", input.display())))?;
        values.push(row.value);
        weights.push(row.weight);
    }
    let sample = WeightedSample::new(values, weights, required(a.ambient_volume, "ambient-volume")?)?;
    let sphere = ModelSpace::sphere(a.sphere_radius.unwrap_or(1.0), a.dim.unwrap_or(2))?;
    let cap = symmetrized_ball(sample.domain_volume(), sample.ambient_volume(), sphere)?;
    let profile = spherical_symmetrization(&sample, &cap, a.n_radii.unwrap_or(1024))?;

    let sink: Box<dyn Write> = match &a.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["r", "f_star"]).map_err(csv_error)?;
    for (r, f) in profile.radii().iter().zip(profile.values()) {
        w.write_record([r.to_string(), f.to_string()]).map_err(csv_error)?;
    }
    w.flush()?;
    if let Some(path) = &a.output {
        println!("cap radius {} in {}, wrote {}", cap.radius(), sphere.scale(), path.display());
    }
    Ok(())
}
