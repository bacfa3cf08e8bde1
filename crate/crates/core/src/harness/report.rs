use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::cfl::CflReport;
use super::{CaseResult, StudyResult, StudyRow};
use crate::error::{config, Error, Result};

pub const CSV_HEADER: [&str; 13] = [
    "level", "h", "k", "stable", "sup_eR", "sup_eL", "eta1", "eoc_eR", "eoc_eL", "eoc_eta1", "iei", "energy_T", "wall_ms",
];

const PROFILE_HEADER: [&str; 9] = ["t", "e_R", "e_L", "sup_e_R", "sup_e_L", "eta1", "iei", "iei_sup", "energy"];
/// Label, column and colour of a plotted row quantity.
type Series = (&'static str, fn(&StudyRow) -> f64, RGBColor);

const INTERVAL_HEADER: [&str; 4] = ["index", "t_left", "t_right", "contribution"];

/// Every file written by one report.
#[derive(Clone, Debug, Default, Serialize)]
pub struct ReportPaths {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub metadata: PathBuf,
    pub profiles: Vec<PathBuf>,
    pub intervals: Vec<PathBuf>,
}

/// Scientific notation with 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn row_record(r: &StudyRow) -> Vec<String> {
    vec![
        r.level.to_string(),
        opt(r.h),
        num(r.k),
        r.stable.to_string(),
        num(r.sup_e_r),
        num(r.sup_e_l),
        num(r.eta1),
        opt(r.eoc_e_r),
        opt(r.eoc_e_l),
        opt(r.eoc_eta1),
        num(r.iei),
        num(r.energy_t),
        r.wall_ms.to_string(),
    ]
}

fn write_rows(path: &Path, rows: &[&StudyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(row_record(r))?;
    }
    w.flush()?;
    Ok(())
}

fn write_case_series(dir: &Path, stem: &str, case: &CaseResult, paths: &mut ReportPaths) -> Result<()> {
    let profile = dir.join(format!("{stem}_level{}_profile.csv", case.row.level));
    let mut w = csv::Writer::from_path(&profile)?;
    w.write_record(PROFILE_HEADER)?;
    for p in &case.profile {
        w.write_record([p.t, p.e_r, p.e_l, p.sup_e_r, p.sup_e_l, p.eta1, p.iei, p.iei_sup, p.energy].map(num))?;
    }
    w.flush()?;
    paths.profiles.push(profile);

    let intervals = dir.join(format!("{stem}_level{}_intervals.csv", case.row.level));
    let mut w = csv::Writer::from_path(&intervals)?;
    w.write_record(INTERVAL_HEADER)?;
    for c in &case.intervals {
        w.write_record([c.index.to_string(), num(c.t_left), num(c.t_right), num(c.contribution)])?;
    }
    w.flush()?;
    paths.intervals.push(intervals);
    Ok(())
}

fn conventions(eoc_parameter: &str) -> serde_json::Value {
    json!({
        "source_interpolant": "linear on each staggered interval (t^{n-1/2}, t^{n+1/2}], equal to f^n at t^n, slope (f^{n+1} - f^{n-1}) / (2k)",
        "source_before_start": "f(t^{-1}) is sampled when the source is defined for t < 0 and taken as zero otherwise",
        "energy": "reconstruction energy |||(U^(t), V^(t))|||^2 / 2",
        "eta1_profile": "eta1 at t^m uses the time integral over [0, t^m]",
        "error_profiles": "instantaneous values and running sups over the sample set, reported at nodes",
        "iei": "sup e_L / eta1; iei_r = sup e_R / eta1 is the ratio bounded by the reliability estimate",
        "inner_product": "grid operators weight the Euclidean product by h^d; spectral coefficients are unweighted",
        "quadrature": "Gauss-Legendre panels on each k/2 subinterval, bisected until doubling the points agrees to 1e-13 relative",
        "clamp": "values beyond 1e300 are written as 1e300",
        "eoc_parameter": eoc_parameter,
    })
}

fn row_details(rows: &[&StudyRow]) -> serde_json::Value {
    rows.iter()
        .map(|r| {
            json!({
                "level": r.level,
                "n_steps": r.n_steps,
                "k_sqrt_lambda_max": r.k_sqrt_lambda_max,
                "iei_r": r.iei_r,
                "eta1_doubled_quadrature": r.eta1_doubled,
                "quadrature_relative_change": r.quadrature_change(),
                "initial_energy_norm": r.initial_energy_norm,
                "max_rho_u": r.max_rho_u,
                "max_rho_v": r.max_rho_v,
            })
        })
        .collect()
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes the study CSV, per-level profile and interval CSVs, an SVG and a
/// JSON metadata sidecar into `dir`.
pub fn emit_report(study: &StudyResult, dir: &Path) -> Result<ReportPaths> {
    if study.cases.is_empty() {
        return Err(config("refusing to write a report without rows"));
    }
    prepare(dir)?;
    let stem = &study.config.name;
    let rows = study.rows();
    let mut paths = ReportPaths {
        csv: dir.join(format!("{stem}.csv")),
        svg: dir.join(format!("{stem}.svg")),
        metadata: dir.join(format!("{stem}.json")),
        ..Default::default()
    };
    write_rows(&paths.csv, &rows)?;
    for case in &study.cases {
        write_case_series(dir, stem, case, &mut paths)?;
    }
    plot_study(&paths.svg, stem, &study.cases)?;
    let eoc_parameter = if rows.iter().all(|r| r.h.is_some()) { "h" } else { "k" };
    let meta = json!({
        "config": study.config,
        "code_version": env!("CARGO_PKG_VERSION"),
        "conventions": conventions(eoc_parameter),
        "rows": row_details(&rows),
    });
    fs::write(&paths.metadata, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(paths)
}

/// Same layout as [`emit_report`] for the three CFL runs, with the verdict in
/// the sidecar.
pub fn emit_cfl_report(report: &CflReport, dir: &Path) -> Result<ReportPaths> {
    prepare(dir)?;
    let stem = &report.config.name;
    let cases = [&report.unstable, &report.control, &report.cosine];
    let rows: Vec<&StudyRow> = cases.iter().map(|c| &c.row).collect();
    let mut paths = ReportPaths {
        csv: dir.join(format!("{stem}.csv")),
        svg: dir.join(format!("{stem}.svg")),
        metadata: dir.join(format!("{stem}.json")),
        ..Default::default()
    };
    write_rows(&paths.csv, &rows)?;
    for case in cases {
        write_case_series(dir, stem, case, &mut paths)?;
    }
    plot_cfl(&paths.svg, stem, report)?;
    let meta = json!({
        "config": report.config,
        "code_version": env!("CARGO_PKG_VERSION"),
        "conventions": conventions("none"),
        "runs": ["leap-frog beyond the stability limit", "leap-frog control", "cosine"],
        "rows": row_details(&rows),
        "verdict": report.verdict,
    });
    fs::write(&paths.metadata, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(paths)
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

const PALETTE: [RGBColor; 6] = [CYAN, GREEN, RGBColor(200, 160, 0), RED, MAGENTA, BLUE];

fn log_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() && hi > 0.0 {
        (lo / 2.0, hi * 2.0)
    } else {
        (1e-16, 1.0)
    }
}

fn plot_study(path: &Path, title: &str, cases: &[CaseResult]) -> Result<()> {
    let root = SVGBackend::new(path, (1200, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let root = root.titled(title, ("sans-serif", 20)).map_err(plot_err)?;
    let (left, right) = root.split_horizontally(600);

    let ks: Vec<f64> = cases.iter().map(|c| c.row.k).collect();
    let (k_lo, k_hi) = log_range(ks.iter().copied());
    let (y_lo, y_hi) = log_range(cases.iter().flat_map(|c| [c.row.sup_e_r, c.row.sup_e_l, c.row.eta1]));
    let mut chart = ChartBuilder::on(&left)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .caption("errors and estimator", ("sans-serif", 16))
        .build_cartesian_2d((k_lo..k_hi).log_scale(), (y_lo..y_hi).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("k")
        .y_label_formatter(&|y| format!("{y:.0e}"))
        .x_label_formatter(&|x| format!("{x:.1e}"))
        .draw()
        .map_err(plot_err)?;
    let series: [Series; 3] = [
        ("sup e_R", |r| r.sup_e_r, BLUE),
        ("sup e_L", |r| r.sup_e_l, GREEN),
        ("eta_1", |r| r.eta1, RED),
    ];
    for (label, f, color) in series {
        let pts: Vec<(f64, f64)> = cases.iter().map(|c| (c.row.k, f(&c.row))).filter(|p| p.1 > 0.0).collect();
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart
            .draw_series(pts.into_iter().map(|p| Circle::new(p, 3, color.filled())))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;

    let t_hi = cases.iter().flat_map(|c| c.profile.last().map(|p| p.t)).fold(0.0_f64, f64::max).max(1e-12);
    let iei_hi = cases
        .iter()
        .flat_map(|c| c.profile.iter().map(|p| p.iei))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max)
        .max(1e-3)
        * 1.1;
    let mut chart = ChartBuilder::on(&right)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .caption("IEI = e_L(t) / eta_1(t)", ("sans-serif", 16))
        .build_cartesian_2d(0.0..t_hi, 0.0..iei_hi)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t").draw().map_err(plot_err)?;
    for (i, case) in cases.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let label = match case.row.h {
            Some(h) => format!("h = {h:.4}"),
            None => format!("k = {:.4}", case.row.k),
        };
        chart
            .draw_series(LineSeries::new(case.profile.iter().skip(1).map(|p| (p.t, p.iei)), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn plot_cfl(path: &Path, title: &str, report: &CflReport) -> Result<()> {
    let root = SVGBackend::new(path, (1200, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let root = root.titled(title, ("sans-serif", 20)).map_err(plot_err)?;
    let (left, right) = root.split_horizontally(600);
    let runs = [
        ("leap-frog, unstable", &report.unstable, RED),
        ("leap-frog, control", &report.control, BLUE),
        ("cosine", &report.cosine, GREEN),
    ];
    let t_hi = runs.iter().flat_map(|r| r.1.profile.last().map(|p| p.t)).fold(0.0_f64, f64::max).max(1e-12);
    let (y_lo, y_hi) = log_range(runs.iter().flat_map(|r| r.1.profile.iter().flat_map(|p| [p.sup_e_l, p.eta1])));
    let mut chart = ChartBuilder::on(&left)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .caption("sup e_L (solid) and eta_1 (dashed)", ("sans-serif", 16))
        .build_cartesian_2d(0.0..t_hi, (y_lo..y_hi).log_scale())
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("t")
        .y_label_formatter(&|y| format!("{y:.0e}"))
        .draw()
        .map_err(plot_err)?;
    for (label, case, color) in runs {
        let err: Vec<(f64, f64)> = case.profile.iter().map(|p| (p.t, p.sup_e_l)).filter(|p| p.1 > 0.0).collect();
        let eta: Vec<(f64, f64)> = case.profile.iter().map(|p| (p.t, p.eta1)).filter(|p| p.1 > 0.0).collect();
        chart
            .draw_series(LineSeries::new(err, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart
            .draw_series(DashedLineSeries::new(eta, 6, 4, color.stroke_width(1)))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperLeft)
        .draw()
        .map_err(plot_err)?;

    let iei_hi = runs
        .iter()
        .flat_map(|r| r.1.profile.iter().map(|p| p.iei))
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max)
        .max(1e-3)
        * 1.1;
    let mut chart = ChartBuilder::on(&right)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .caption("IEI = e_L(t) / eta_1(t)", ("sans-serif", 16))
        .build_cartesian_2d(0.0..t_hi, 0.0..iei_hi)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("t").draw().map_err(plot_err)?;
    for (_, case, color) in runs {
        chart
            .draw_series(LineSeries::new(case.profile.iter().skip(1).map(|p| (p.t, p.iei)), color.stroke_width(2)))
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}
