//! Standalone SVG summaries of one partition.
//!
//! - `timing.svg`: start times of each household's most frequent motif, one
//!   column per household, grouped by cluster.
//! - `profiles.svg`: average peak-period profile of every household, one
//!   panel per cluster.
//! - `summary.svg`: cluster sizes with the mean spread of the daily time of
//!   maximum usage written above each bar.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use motifvar_core::cluster::Partition;
use motifvar_core::ingest::PeakDayWindow;
use motifvar_core::motif::{household_catalog, nonmotif_features, profile_features, ranked_motifs};
use motifvar_core::sax::SaxParams;

use crate::error::CliError;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn colour(cluster: usize) -> &'static str {
    PALETTE[(cluster - 1) % PALETTE.len()]
}

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Minimal SVG document builder. Coordinates are written with two decimals.
pub struct Svg {
    width: f64,
    height: f64,
    body: String,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Svg {
            width,
            height,
            body: String::new(),
        }
    }

    pub fn text(&mut self, x: f64, y: f64, size: f64, anchor: &str, text: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(text)
        );
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="1"/>"#
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" fill="{fill}" stroke="black" stroke-width="0.5"/>"#
        );
    }

    pub fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r}" fill="{fill}" fill-opacity="0.6"/>"#
        );
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="1" stroke-opacity="0.7"/>"#,
            pts.join(" ")
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Household ids of each cluster `1..=k`, in matrix order.
fn members<'a>(partition: &Partition, ids: &'a [String]) -> Vec<Vec<&'a String>> {
    let mut out = vec![Vec::new(); partition.k];
    for (id, &l) in ids.iter().zip(&partition.labels) {
        out[l - 1].push(id);
    }
    out
}

/// Start times (minutes after peak start) of one household's top motif.
pub fn top_motif_times(id: &str, windows: &[PeakDayWindow], sax: &SaxParams) -> Vec<f64> {
    match household_catalog(id, windows, sax) {
        Ok(cat) => ranked_motifs(&cat)
            .first()
            .map(|(_, occ)| occ.iter().map(|o| f64::from(o.start_clock)).collect())
            .unwrap_or_default(),
        Err(e) => {
            log::warn!("timing plot: household {id}: {e}");
            Vec::new()
        }
    }
}

pub fn timing_plot(
    partition: &Partition,
    ids: &[String],
    windows: &BTreeMap<String, Vec<PeakDayWindow>>,
    sax: &SaxParams,
    peak_minutes: f64,
) -> String {
    let groups = members(partition, ids);
    let (left, top, plot_h) = (60.0, 40.0, 300.0);
    let col = 8.0;
    let gap = 20.0;
    let width = left + groups.iter().map(|g| g.len().max(1) as f64 * col + gap).sum::<f64>() + 20.0;
    let mut svg = Svg::new(width, top + plot_h + 60.0);
    svg.text(width / 2.0, 20.0, 14.0, "middle", &format!("Top motif start times by cluster ({})", partition.algorithm));
    svg.line(left, top, left, top + plot_h, "black");
    let y_of = |m: f64| top + plot_h - (m / peak_minutes.max(1.0)) * plot_h;
    for tick in (0..=peak_minutes as usize).step_by(60) {
        let y = y_of(tick as f64);
        svg.line(left - 4.0, y, left, y, "black");
        svg.text(left - 6.0, y + 4.0, 10.0, "end", &format!("+{tick}"));
    }
    svg.text(15.0, top + plot_h / 2.0, 10.0, "middle", "min");
    let mut x = left + gap / 2.0;
    for (c, group) in groups.iter().enumerate() {
        let start = x;
        for id in group {
            let times = windows.get(*id).map(|ws| top_motif_times(id, ws, sax)).unwrap_or_default();
            for t in times {
                svg.circle(x + col / 2.0, y_of(t), 2.0, colour(c + 1));
            }
            x += col;
        }
        if group.is_empty() {
            x += col;
        }
        svg.text((start + x) / 2.0, top + plot_h + 20.0, 11.0, "middle", &format!("C{} (n={})", c + 1, group.len()));
        x += gap;
    }
    svg.finish()
}

pub fn profile_plot(partition: &Partition, ids: &[String], windows: &BTreeMap<String, Vec<PeakDayWindow>>) -> String {
    let groups = members(partition, ids);
    let profiles: BTreeMap<&String, Vec<f64>> = ids
        .iter()
        .filter_map(|id| windows.get(id).map(|ws| (id, profile_features(ws).values)))
        .collect();
    let ymax = profiles.values().flatten().cloned().fold(1.0, f64::max);
    let (pw, ph, cols) = (220.0, 160.0, 4usize);
    let rows = groups.len().div_ceil(cols).max(1);
    let mut svg = Svg::new(cols as f64 * (pw + 30.0) + 30.0, rows as f64 * (ph + 50.0) + 40.0);
    svg.text(svg.width / 2.0, 20.0, 14.0, "middle", &format!("Average peak profiles by cluster ({})", partition.algorithm));
    for (c, group) in groups.iter().enumerate() {
        let ox = 30.0 + (c % cols) as f64 * (pw + 30.0);
        let oy = 40.0 + (c / cols) as f64 * (ph + 50.0);
        svg.rect(ox, oy, pw, ph, "none");
        svg.text(ox + pw / 2.0, oy + ph + 16.0, 11.0, "middle", &format!("C{} (n={})", c + 1, group.len()));
        for id in group {
            let Some(p) = profiles.get(id) else { continue };
            let n = p.len().max(2) - 1;
            let pts: Vec<(f64, f64)> = p
                .iter()
                .enumerate()
                .map(|(i, v)| (ox + pw * i as f64 / n as f64, oy + ph - ph * v / ymax))
                .collect();
            svg.polyline(&pts, colour(c + 1));
        }
    }
    svg.text(15.0, 34.0, 10.0, "start", &format!("max {ymax:.0} W"));
    svg.finish()
}

pub fn summary_plot(partition: &Partition, ids: &[String], windows: Option<&BTreeMap<String, Vec<PeakDayWindow>>>) -> String {
    let groups = members(partition, ids);
    let biggest = groups.iter().map(Vec::len).max().unwrap_or(1).max(1) as f64;
    let (left, top, ph, bw) = (50.0, 50.0, 240.0, 50.0);
    let width = left + groups.len() as f64 * (bw + 20.0) + 30.0;
    let mut svg = Svg::new(width, top + ph + 60.0);
    svg.text(width / 2.0, 20.0, 14.0, "middle", &format!("Cluster sizes ({})", partition.algorithm));
    if windows.is_some() {
        svg.text(width / 2.0, 36.0, 10.0, "middle", "label: mean sd of daily time of maximum (min)");
    }
    svg.line(left, top + ph, width - 20.0, top + ph, "black");
    for (c, group) in groups.iter().enumerate() {
        let x = left + 10.0 + c as f64 * (bw + 20.0);
        let h = ph * group.len() as f64 / biggest;
        svg.rect(x, top + ph - h, bw, h, colour(c + 1));
        svg.text(x + bw / 2.0, top + ph + 16.0, 11.0, "middle", &format!("C{}", c + 1));
        svg.text(x + bw / 2.0, top + ph + 30.0, 10.0, "middle", &format!("n={}", group.len()));
        if let Some(ws) = windows {
            let sds: Vec<f64> = group
                .iter()
                .filter_map(|id| ws.get(*id))
                .map(|w| nonmotif_features(w).time_of_max_sd)
                .collect();
            if !sds.is_empty() {
                let mean = sds.iter().sum::<f64>() / sds.len() as f64;
                svg.text(x + bw / 2.0, top + ph - h - 4.0, 10.0, "middle", &format!("{mean:.1}"));
            }
        }
    }
    svg.finish()
}

/// Write whichever plots the inputs allow; returns the file names written.
/// Failures are logged and skipped.
pub fn write_plots(
    dir: &Path,
    partition: &Partition,
    ids: &[String],
    windows: Option<&BTreeMap<String, Vec<PeakDayWindow>>>,
    sax: &SaxParams,
    peak_minutes: f64,
) -> Vec<String> {
    let mut docs = vec![("summary.svg", summary_plot(partition, ids, windows))];
    if let Some(ws) = windows {
        docs.push(("timing.svg", timing_plot(partition, ids, ws, sax, peak_minutes)));
        docs.push(("profiles.svg", profile_plot(partition, ids, ws)));
    }
    let mut written = Vec::new();
    if let Err(e) = std::fs::create_dir_all(dir) {
        log::warn!("plots skipped: {}", CliError::write(dir, e));
        return written;
    }
    for (name, doc) in docs {
        let path = dir.join(name);
        match std::fs::write(&path, doc) {
            Ok(()) => written.push(name.to_string()),
            Err(e) => log::warn!("plot skipped: {}", CliError::write(&path, e)),
        }
    }
    written
}
