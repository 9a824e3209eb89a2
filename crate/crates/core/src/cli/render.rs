//! Figures built only from the persisted CSV and JSON files, so they can be
//! regenerated at any time.

use super::commands::RunInfo;
use super::output::Table;
use super::svg::{render, Panel, Series, Style};
use crate::phases::CONSTANT_NAMES;
use crate::training::Trajectory;
use crate::Result;

pub fn render_trajectory(csv: &str, info: &RunInfo) -> Result<String> {
    let (hash, records) = Trajectory::records_from_csv(csv)?;
    let pts = |f: &dyn Fn(&crate::training::StepRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        records
            .iter()
            .filter_map(|r| f(r).map(|y| (r.t as f64, y)))
            .collect()
    };
    let label = format!(
        "{} {}={} seed {}",
        info.arch.label(),
        info.scaling,
        info.c,
        info.seed
    );
    let loss = Panel {
        title: format!("training loss, {label}"),
        x_label: "step t".into(),
        y_label: "loss".into(),
        log_y: true,
        series: vec![Series::new("loss", pts(&|r| Some(r.loss)), Style::Line)],
        ..Default::default()
    };
    let mut sharp_lines = Vec::new();
    if info.scaling == "c" {
        sharp_lines.push((2.0 / info.eta, "2/eta".to_string()));
    }
    let sharp = Panel {
        title: format!("sharpness, {label}"),
        x_label: "step t".into(),
        y_label: if info.scaling == "k" {
            "Tr H"
        } else {
            "top Hessian eigenvalue"
        }
        .into(),
        log_y: true,
        series: vec![Series::new(
            "sharpness",
            pts(&|r| r.sharpness),
            Style::LineMarkers,
        )],
        hlines: sharp_lines,
        ..Default::default()
    };
    let acc = Panel {
        title: format!("training accuracy, {label}"),
        x_label: "step t".into(),
        y_label: "accuracy".into(),
        series: vec![Series::new(
            "accuracy",
            pts(&|r| Some(r.accuracy)),
            Style::Line,
        )],
        ..Default::default()
    };
    Ok(render(
        &format!("Trajectory {label}"),
        &format!("manifest={hash}"),
        &[loss, sharp, acc],
    ))
}

pub fn render_phase_diagram(rows_csv: &str, fits_csv: &str, scaling: &str) -> Result<String> {
    let rows = Table::parse(rows_csv)?;
    let fits = Table::parse(fits_csv)?;
    let ratio = rows.floats("ratio")?;
    let x_label = if scaling == "k" { "1/w" } else { "d/w" };
    let mut panels = Vec::new();
    for name in CONSTANT_NAMES {
        let mean = rows.floats(&format!("{name}_mean"))?;
        let q25 = rows.floats(&format!("{name}_q25"))?;
        let q75 = rows.floats(&format!("{name}_q75"))?;
        let mut points = Vec::new();
        let mut bars = Vec::new();
        for i in 0..ratio.len() {
            if let (Some(x), Some(y), Some(lo), Some(hi)) = (ratio[i], mean[i], q25[i], q75[i]) {
                points.push((x, y));
                bars.push((lo, hi));
            }
        }
        let display = if scaling == "k" {
            name.replacen("c_", "k_", 1)
        } else {
            name.to_string()
        };
        let mut series = vec![Series {
            name: format!("mean {display}"),
            points,
            bars: Some(bars),
            style: Style::Markers,
        }];
        let names = fits.strings("name")?;
        if let Some(i) = names.iter().position(|n| n == name) {
            let get = |col: &str| fits.floats(col).map(|v| v[i].unwrap_or(0.0));
            let coeffs = [get("coeff0")?, get("coeff1")?, get("coeff2")?];
            let (lo, hi) = (get("ratio_min")?, get("ratio_max")?);
            let curve = (0..=60)
                .map(|k| {
                    let x = lo + (hi - lo) * k as f64 / 60.0;
                    (x, coeffs[0] + coeffs[1] * x + coeffs[2] * x * x)
                })
                .collect();
            series.push(Series::new("quadratic fit", curve, Style::Line));
        }
        panels.push(Panel {
            title: format!("{display} vs {x_label} (bars: 25-75% quantiles)"),
            x_label: x_label.into(),
            y_label: display,
            log_y: true,
            series,
            ..Default::default()
        });
    }
    Ok(render(
        "Phase diagram",
        &format!("manifest={}", rows.hash),
        &panels,
    ))
}

pub fn render_saturation(points_csv: &str, crit_csv: &str) -> Result<String> {
    let t = Table::parse(points_csv)?;
    let crit = Table::parse(crit_csv)?;
    let archs = t.strings("arch")?;
    let c = t.floats("c")?;
    let mean = t.floats("mean")?;
    let std = t.floats("std")?;
    let chi = t.floats("chi")?;
    let chi_p = t.floats("chi_prime")?;
    let mut order: Vec<String> = Vec::new();
    for a in &archs {
        if !order.contains(a) {
            order.push(a.clone());
        }
    }
    let collect = |a: &str, ys: &[Option<f64>]| -> Vec<(f64, f64)> {
        (0..c.len())
            .filter(|&i| archs[i] == a)
            .filter_map(|i| Some((c[i]?, ys[i]?)))
            .collect()
    };
    let mut sharp = Panel {
        title: "normalized saturation sharpness".into(),
        x_label: "c".into(),
        y_label: "lambda_tau / lambda_0".into(),
        log_x: true,
        ..Default::default()
    };
    let mut chi_panel = Panel {
        title: "chi = -d/dc".into(),
        x_label: "c".into(),
        y_label: "chi".into(),
        log_x: true,
        ..Default::default()
    };
    let mut chi_p_panel = Panel {
        title: "chi' = -d2/dc2 (dashed: c_crit)".into(),
        x_label: "c".into(),
        y_label: "chi'".into(),
        log_x: true,
        ..Default::default()
    };
    for a in &order {
        let mut s = Series::new(a.clone(), collect(a, &mean), Style::LineMarkers);
        s.bars = Some(
            (0..c.len())
                .filter(|&i| archs[i] == *a && c[i].is_some() && mean[i].is_some())
                .map(|i| {
                    let (m, sd) = (mean[i].unwrap_or(0.0), std[i].unwrap_or(0.0));
                    (m - sd, m + sd)
                })
                .collect(),
        );
        sharp.series.push(s);
        chi_panel
            .series
            .push(Series::new(a.clone(), collect(a, &chi), Style::Line));
        chi_p_panel
            .series
            .push(Series::new(a.clone(), collect(a, &chi_p), Style::Line));
    }
    let crit_arch = crit.strings("arch")?;
    for (a, v) in crit_arch.iter().zip(crit.floats("c_crit")?) {
        if let Some(v) = v {
            chi_p_panel.vlines.push((v, format!("c_crit {a}")));
        }
    }
    Ok(render(
        "Intermediate saturation",
        &format!("manifest={}", t.hash),
        &[sharp, chi_panel, chi_p_panel],
    ))
}
