use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavica::combinatorics::count_matching;
use wavica::demix::{amari_error, jacobi_sweep, MixingMatrix};
use wavica::estimators::{d2_brute, d2_fast, estimate, regime_warning};
use wavica::experiments::{
    generate_mixed, rate_experiment, theoretical_rate, MonteCarlo, Regime, SourceSpec,
};
use wavica::wavelet::{build_table, make_filter};
use wavica::{EstimatorKind, Sample, WaveletSpec};

use crate::io::{csv_writer, fmt_f64, fmt_f64_17, open_output, read_matrix, read_sample};
use crate::{
    parse_rational, CliError, ContrastArgs, DemixArgs, GenArgs, RatesArgs, SourceArgs, WaveletArgs,
};

fn wavelet_spec(w: WaveletArgs) -> Result<WaveletSpec, CliError> {
    Ok(WaveletSpec::new(w.wavelet as usize, w.level)?)
}

fn warn_if_degenerate(spec: WaveletSpec, d: usize, n: usize) {
    if let Some(msg) = regime_warning(spec, d, n) {
        eprintln!("warning: {msg}");
    }
}

fn parse_mixing(text: &str, d: usize) -> Result<MixingMatrix, CliError> {
    if text == "identity" {
        return Ok(MixingMatrix::identity(d));
    }
    if let Some(deg) = text.strip_prefix("rotation:") {
        if d != 2 {
            return Err(CliError::input("rotation mixing requires --d 2".into()));
        }
        let deg: f64 = deg
            .parse()
            .map_err(|_| CliError::input(format!("bad rotation angle '{deg}'")))?;
        return Ok(MixingMatrix::rotation_2d(deg.to_radians()));
    }
    let matrix = read_matrix(std::path::Path::new(text))?;
    if matrix.shape() != (d, d) {
        return Err(CliError::input(format!(
            "mixing matrix is {}x{}, expected {d}x{d}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    MixingMatrix::new(matrix).map_err(|e| CliError::input(e.to_string()))
}

fn parse_grid(text: &str) -> Result<Vec<usize>, CliError> {
    let grid = text
        .split(',')
        .map(|t| match t.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::input(format!("bad n-grid entry '{t}'"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if grid.len() < 3 {
        return Err(CliError::input("n-grid needs at least 3 sizes".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CliError::input("n-grid must be strictly increasing".into()));
    }
    Ok(grid)
}

fn source_and_mixing(a: &SourceArgs) -> Result<(SourceSpec, MixingMatrix), CliError> {
    let d = a.d as usize;
    Ok((SourceSpec::iid(a.source, d), parse_mixing(&a.mixing, d)?))
}

pub fn contrast(a: ContrastArgs) -> Result<(), CliError> {
    let spec = wavelet_spec(a.wavelet)?;
    let sample = read_sample(&a.input)?;
    let table = spec.table()?;
    warn_if_degenerate(spec, sample.dim(), sample.len());
    let est = estimate(a.estimator, &sample, spec, &table)?;
    let mut w = csv_writer(open_output(a.output.as_deref())?);
    w.write_record(["estimator", "N", "j", "d", "n", "value"])?;
    w.write_record([
        est.estimator.to_string(),
        spec.order.to_string(),
        spec.level.to_string(),
        est.d.to_string(),
        est.n_used.to_string(),
        fmt_f64(est.value),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn rates(a: RatesArgs) -> Result<(), CliError> {
    let s = parse_rational(&a.s)?;
    if s <= 0.into() {
        return Err(CliError::input(format!("--s must be positive, got {}", a.s)));
    }
    let spec = wavelet_spec(a.wavelet)?;
    let grid = parse_grid(&a.n_grid)?;
    if !a.target.is_finite() {
        return Err(CliError::input("--target must be finite".into()));
    }
    let (source, mixing) = source_and_mixing(&a.source)?;
    let d = source.dim();
    warn_if_degenerate(spec, d, grid[0]);
    let table = spec.table()?;
    let config = MonteCarlo {
        estimator: a.estimator,
        source,
        mixing,
        spec,
        replicates: a.replicates as usize,
        seed: a.source.seed,
    };
    let report = rate_experiment(&config, &table, &grid, a.target)?;
    let regime = Regime::of(spec, d, grid[0]);
    let (theory, theory_rational) = match theoretical_rate(a.estimator, s, d, regime) {
        Ok(r) => (fmt_f64(*r.numer() as f64 / *r.denom() as f64), r.to_string()),
        Err(wavica::Error::InoperableRegime) => ("inoperable".into(), "inoperable".into()),
        Err(_) => ("none".into(), "none".into()),
    };

    let mut w = csv_writer(open_output(a.output.as_deref())?);
    let head = [
        a.estimator.to_string(),
        spec.order.to_string(),
        spec.level.to_string(),
        d.to_string(),
    ];
    for (n, m) in grid.iter().zip(&report.mse) {
        let mut rec = vec!["mse".to_string()];
        rec.extend(head.iter().cloned());
        rec.extend([
            n.to_string(),
            a.replicates.to_string(),
            fmt_f64(m.mean),
            fmt_f64(m.stderr),
        ]);
        w.write_record(&rec)?;
    }
    let mut rec = vec!["summary".to_string()];
    rec.extend(head.iter().cloned());
    rec.extend([
        s.to_string(),
        regime.to_string(),
        fmt_f64(report.slope),
        fmt_f64(report.slope_stderr),
        theory,
        theory_rational,
    ]);
    w.write_record(&rec)?;
    w.flush()?;
    Ok(())
}

fn write_matrix_rows(
    w: &mut csv::Writer<Box<dyn Write>>,
    tag: &str,
    m: &DMatrix<f64>,
) -> Result<(), CliError> {
    for (i, row) in m.row_iter().enumerate() {
        let mut rec = vec![tag.to_string(), (i + 1).to_string()];
        rec.extend(row.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    Ok(())
}

pub fn demix(a: DemixArgs) -> Result<(), CliError> {
    let spec = wavelet_spec(a.wavelet)?;
    let sample = read_sample(&a.input)?;
    let d = sample.dim();
    if d < 2 {
        return Err(CliError::input("demix needs at least 2 columns".into()));
    }
    let truth = match &a.truth {
        Some(p) => {
            let m = read_matrix(p)?;
            if m.shape() != (d, d) {
                return Err(CliError::input(format!(
                    "truth matrix is {}x{}, expected {d}x{d}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            Some(m)
        }
        None => None,
    };
    let table = spec.table()?;
    warn_if_degenerate(spec, d, sample.len());
    let result = jacobi_sweep(&sample, spec, &table, a.sweeps, a.grid_size)?;

    let mut w = csv_writer(open_output(a.output.as_deref())?);
    write_matrix_rows(&mut w, "W", &result.rotation)?;
    write_matrix_rows(&mut w, "whitening", &result.whitening)?;
    write_matrix_rows(&mut w, "unmixing", &result.unmixing)?;
    w.write_record(["initial_contrast".to_string(), fmt_f64(result.initial_contrast)])?;
    w.write_record(["final_contrast".to_string(), fmt_f64(result.final_contrast)])?;
    for step in &result.trace {
        w.write_record([
            "trace".to_string(),
            (step.sweep + 1).to_string(),
            (step.plane.0 + 1).to_string(),
            (step.plane.1 + 1).to_string(),
            fmt_f64(step.angle),
            fmt_f64(step.contrast),
        ])?;
    }
    if let Some(t) = truth {
        let err = amari_error(&(&result.unmixing * t))?;
        w.write_record(["amari_error".to_string(), fmt_f64(err)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn gen(a: GenArgs) -> Result<(), CliError> {
    let (source, mixing) = source_and_mixing(&a.source)?;
    let mixed = generate_mixed(&source, &mixing, a.n, a.source.seed)?;
    let d = source.dim();
    let mut w = csv_writer(open_output(a.output.as_deref())?);
    w.write_record((1..=d).map(|i| format!("x{i}")))?;
    for row in mixed.sample.rows() {
        w.write_record(row.iter().map(|v| fmt_f64_17(*v)))?;
    }
    w.flush()?;
    if let Some(path) = &a.truth {
        let m = mixed.effective_mixing(&mixing);
        let mut t = csv_writer(open_output(Some(path))?);
        for row in m.row_iter() {
            t.write_record(row.iter().map(|v| fmt_f64_17(*v)))?;
        }
        t.flush()?;
    }
    Ok(())
}

struct Check {
    name: String,
    ok: bool,
    detail: String,
}

fn run_checks() -> Vec<Check> {
    let mut checks = Vec::new();
    for order in 1..=8 {
        let name = format!("filter-D{}", 2 * order);
        match make_filter(order) {
            Ok(f) => {
                let ok = f.sum_residual() <= 1e-12
                    && f.orthonormality_residual() <= 1e-10
                    && f.moment_residual() <= 1e-8;
                let detail = format!(
                    "sum {:e} orth {:e} moments {:e}",
                    f.sum_residual(),
                    f.orthonormality_residual(),
                    f.moment_residual()
                );
                checks.push(Check { name, ok, detail });
                let name = format!("table-D{}", 2 * order);
                match build_table(&f, 10) {
                    Ok(t) => {
                        let r = t.refinement_residual();
                        let p = t.partition_of_unity_residual();
                        checks.push(Check {
                            name,
                            ok: r <= 1e-8 && p <= 1e-8,
                            detail: format!("refinement {r:e} unity {p:e}"),
                        });
                    }
                    Err(e) => checks.push(Check {
                        name,
                        ok: false,
                        detail: e.to_string(),
                    }),
                }
            }
            Err(e) => checks.push(Check {
                name,
                ok: false,
                detail: e.to_string(),
            }),
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    let mut failure = None;
    for order in [1, 2] {
        let spec = WaveletSpec::new(order, 1).expect("valid spec");
        let table = match spec.table() {
            Ok(t) => t,
            Err(e) => {
                failure = Some(e.to_string());
                continue;
            }
        };
        let data: Vec<f64> = (0..16).map(|_| rng.gen()).collect();
        let sample = Sample::new(2, data).expect("values in [0,1]");
        match (d2_brute(&sample, spec, &table), d2_fast(&sample, spec, &table)) {
            (Ok(b), Ok(f)) => {
                let scale = b.value.abs().max(1e-12);
                worst = worst.max((b.value - f.value).abs() / scale);
            }
            (Err(e), _) | (_, Err(e)) => failure = Some(e.to_string()),
        }
    }
    checks.push(Check {
        name: "d2-fast-vs-brute".into(),
        ok: failure.is_none() && worst <= 1e-9,
        detail: failure.unwrap_or_else(|| format!("relative difference {worst:e}")),
    });

    let matching_ok = (1..=6u64).all(|n| {
        (0..=n.min(3)).all(|m| {
            let total: u64 = (0..=m).filter_map(|b| count_matching(n, m, b).ok()).sum();
            let a = (0..m).map(|i| n - i).product::<u64>();
            total == a * a
        })
    });
    checks.push(Check {
        name: "matching-counts".into(),
        ok: matching_ok,
        detail: "sum over b equals squared falling factorial".into(),
    });

    let unit = MixingMatrix::identity(2);
    let source = SourceSpec::iid(wavica::experiments::SourceKind::Uniform, 2);
    let gen_ok = generate_mixed(&source, &unit, 8, 3)
        .map(|m| m.sample.as_slice().iter().all(|v| (0.0..=1.0).contains(v)))
        .unwrap_or(false);
    checks.push(Check {
        name: "generator-range".into(),
        ok: gen_ok,
        detail: "identity mixing stays in the unit square".into(),
    });

    let rate_ok = theoretical_rate(
        EstimatorKind::C2,
        1.into(),
        2,
        Regime::SmallJ,
    )
    .map(|r| r == wavica::experiments::Rational::new(-2, 3))
    .unwrap_or(false);
    checks.push(Check {
        name: "rate-table".into(),
        ok: rate_ok,
        detail: "c2 exponent at s=1, d=2".into(),
    });
    checks
}

pub fn selftest() -> Result<(), CliError> {
    let checks = run_checks();
    let mut w = csv_writer(open_output(None)?);
    w.write_record(["check", "status", "detail"])?;
    for c in &checks {
        w.write_record([c.name.as_str(), if c.ok { "ok" } else { "FAIL" }, c.detail.as_str()])?;
    }
    w.flush()?;
    let failed = checks.iter().filter(|c| !c.ok).count();
    if failed > 0 {
        return Err(CliError::numeric(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}
