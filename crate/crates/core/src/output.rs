//! Log emission: CSV, SVG plots and the plain-text summary table.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::control::DistanceKind;
use crate::sim::{SimLog, StepRecord, Summary, VehicleRecord};

/// Column order of the CSV log.
pub const CSV_HEADER: [&str; 21] = [
    "t",
    "vehicle_id",
    "x",
    "y",
    "theta",
    "v",
    "s",
    "y_tilde",
    "theta_tilde",
    "v_r",
    "a",
    "chi",
    "delta",
    "e_tilde",
    "nu",
    "d_eta_L",
    "d_eta_R",
    "d_rho",
    "lyap_lat",
    "lyap_lon",
    "breach_flag",
];

/// Nine significant digits; undefined values print as `nan`.
fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".to_owned()
    } else {
        format!("{x:.8e}")
    }
}

/// Values of one CSV row in [`CSV_HEADER`] order. Undefined entries are NaN.
pub fn row_values(record: &StepRecord, v: &VehicleRecord) -> [f64; 21] {
    let breached = record.breach_events.iter().any(|b| b.vehicle == v.id);
    let opt = |x: Option<f64>| x.unwrap_or(f64::NAN);
    [
        record.t,
        v.id as f64,
        v.state.x,
        v.state.y,
        v.state.theta,
        v.state.v,
        v.frenet.s,
        v.frenet.y_tilde,
        v.frenet.theta_tilde,
        v.frenet.v_r,
        v.input.a,
        v.input.chi,
        v.delta,
        opt(v.e_tilde),
        opt(v.nu),
        v.distances.d_eta_l,
        v.distances.d_eta_r,
        opt(v.distances.d_rho),
        v.lyap_lat,
        opt(v.lyap_lon),
        f64::from(u8::from(breached)),
    ]
}

/// Writes one row per control tick per vehicle.
pub fn write_csv<W: io::Write>(records: &[StepRecord], out: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for record in records {
        for v in &record.vehicles {
            let values = row_values(record, v);
            // id and breach flag are integers
            let fields = values.iter().enumerate().map(|(i, &x)| match i {
                1 | 20 => (x as u64).to_string(),
                _ => num(x),
            });
            writer.write_record(fields)?;
        }
    }
    writer.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[StepRecord], path: &Path) -> io::Result<()> {
    let file = io::BufWriter::new(std::fs::File::create(path)?);
    write_csv(records, file).map_err(io::Error::other)
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn color(id: usize) -> &'static str {
    PALETTE[(id - 1) % PALETTE.len()]
}

struct Series {
    color: &'static str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    series: Vec<Series>,
}

#[derive(Clone, Copy)]
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn map(&self, (x, y): (f64, f64)) -> (f64, f64) {
        (
            self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width,
            self.top + self.height - (y - self.y.0) / (self.y.1 - self.y.0) * self.height,
        )
    }
}

/// Smallest and largest finite value, or `None` without any.
fn extent<'a>(values: impl Iterator<Item = &'a f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    lo.is_finite().then_some((lo, hi))
}

/// [`extent`] padded by 5% on each side.
fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let Some((lo, hi)) = extent(values) else {
        return (-1.0, 1.0);
    };
    if hi - lo < 1e-9 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn svg_open(title: &str) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    svg
}

/// Polylines, broken wherever a value is not finite.
fn draw_series(svg: &mut String, frame: &Frame, series: &Series) {
    let dash = if series.dashed {
        r#" stroke-dasharray="6,4""#
    } else {
        ""
    };
    let mut run: Vec<String> = Vec::new();
    let flush = |run: &mut Vec<String>, svg: &mut String| {
        if run.len() > 1 {
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.2"{dash} points="{}"/>"#,
                series.color,
                run.join(" ")
            );
        }
        run.clear();
    };
    for &(x, y) in &series.points {
        if x.is_finite() && y.is_finite() {
            let (px, py) = frame.map((x, y));
            run.push(format!("{px:.2},{py:.2}"));
        } else {
            flush(&mut run, svg);
        }
    }
    flush(&mut run, svg);
}

fn draw_axes(svg: &mut String, frame: &Frame, title: &str) {
    let _ = writeln!(
        svg,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        frame.left, frame.top, frame.width, frame.height
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
        frame.left + 4.0,
        frame.top - 4.0,
        escape(title)
    );
    for (value, anchor_y) in [
        (frame.y.0, frame.top + frame.height),
        (frame.y.1, frame.top + 10.0),
    ] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            frame.left - 4.0,
            anchor_y,
            short(value)
        );
    }
    for (value, anchor) in [(frame.x.0, "start"), (frame.x.1, "end")] {
        let (px, _) = frame.map((value, frame.y.0));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{}</text>"#,
            px,
            frame.top + frame.height + 12.0,
            short(value)
        );
    }
    if frame.y.0 < 0.0 && frame.y.1 > 0.0 {
        let (x0, y0) = frame.map((frame.x.0, 0.0));
        let (x1, _) = frame.map((frame.x.1, 0.0));
        let _ = writeln!(
            svg,
            r##"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x1:.1}" y2="{y0:.1}" stroke="#bbb" stroke-width="0.8"/>"##
        );
    }
}

fn short(value: f64) -> String {
    if value != 0.0 && (value.abs() >= 1e4 || value.abs() < 1e-2) {
        format!("{value:.2e}")
    } else {
        format!("{value:.2}")
    }
}

fn draw_legend(svg: &mut String, entries: &[(String, &'static str, bool)]) {
    let mut x = 60.0;
    for (label, color, dashed) in entries {
        let dash = if *dashed {
            r#" stroke-dasharray="6,4""#
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2"{dash}/>"#,
            x + 18.0,
            y = HEIGHT - 10.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}">{}</text>"#,
            x + 22.0,
            HEIGHT - 6.0,
            escape(label)
        );
        x += 30.0 + 7.0 * label.len() as f64;
    }
}

/// Stacked time-series panels sharing the x axis.
fn render_panels(title: &str, panels: &[Panel], legend: &[(String, &'static str, bool)]) -> String {
    let mut svg = svg_open(title);
    let (top, bottom, left, right) = (40.0, 40.0, 70.0, 20.0);
    let gap = 28.0;
    let height = (HEIGHT - top - bottom - gap * (panels.len() as f64 - 1.0)) / panels.len() as f64;
    let x_range = extent(
        panels
            .iter()
            .flat_map(|p| p.series.iter())
            .flat_map(|s| s.points.iter().map(|(x, _)| x)),
    )
    .filter(|(lo, hi)| hi > lo)
    .unwrap_or((0.0, 1.0));
    for (k, panel) in panels.iter().enumerate() {
        let frame = Frame {
            left,
            top: top + k as f64 * (height + gap),
            width: WIDTH - left - right,
            height,
            x: x_range,
            y: bounds(
                panel
                    .series
                    .iter()
                    .flat_map(|s| s.points.iter().map(|(_, y)| y)),
            ),
        };
        draw_axes(&mut svg, &frame, &panel.title);
        for series in &panel.series {
            draw_series(&mut svg, &frame, series);
        }
    }
    draw_legend(&mut svg, legend);
    svg.push_str("</svg>\n");
    svg
}

type Channel = fn(&crate::sim::VehicleRecord) -> Option<f64>;

fn channel_series(
    log: &SimLog,
    channel: Channel,
    dashed: bool,
    followers_only: bool,
) -> Vec<Series> {
    let n = log.config.n_vehicles();
    (1..=n)
        .filter(|&id| !followers_only || id > 1)
        .map(|id| Series {
            color: color(id),
            dashed,
            points: log
                .records
                .iter()
                .map(|r| (r.t, channel(&r.vehicles[id - 1]).unwrap_or(f64::NAN)))
                .collect(),
        })
        .collect()
}

fn vehicle_legend(n: usize, skip_leader: bool) -> Vec<(String, &'static str, bool)> {
    (1..=n)
        .filter(|&id| !skip_leader || id > 1)
        .map(|id| (format!("vehicle {id}"), color(id), false))
        .collect()
}

const ERROR_CHANNELS: [(&str, Channel); 4] = [
    ("lateral error y~ [m]", |v| Some(v.frenet.y_tilde)),
    ("heading error theta~ [rad]", |v| Some(v.frenet.theta_tilde)),
    ("speed error v - v* [m/s]", |v| Some(v.v_tilde)),
    ("gap error e~ [m]", |v| v.e_tilde),
];

const SAFETY_CHANNELS: [(&str, Channel); 2] = [
    ("d_rho [m]", |v| v.distances.d_rho),
    ("d_eta = min(d_eta_L, d_eta_R) [m]", |v| {
        Some(v.distances.d_eta())
    }),
];

const INPUT_CHANNELS: [(&str, Channel); 2] = [
    ("acceleration a [m/s^2]", |v| Some(v.input.a)),
    ("steering angle delta [rad]", |v| Some(v.delta)),
];

fn channel_plot(log: &SimLog, title: &str, channels: &[(&str, Channel)]) -> String {
    let panels: Vec<Panel> = channels
        .iter()
        .map(|(name, channel)| Panel {
            title: (*name).to_owned(),
            series: channel_series(log, *channel, false, true),
        })
        .collect();
    render_panels(
        title,
        &panels,
        &vehicle_legend(log.config.n_vehicles(), true),
    )
}

pub fn errors_svg(log: &SimLog) -> String {
    channel_plot(
        log,
        &format!("{}: tracking errors vs t [s]", log.config.name),
        &ERROR_CHANNELS,
    )
}

pub fn safety_svg(log: &SimLog) -> String {
    channel_plot(
        log,
        &format!("{}: safety distances vs t [s]", log.config.name),
        &SAFETY_CHANNELS,
    )
}

pub fn inputs_svg(log: &SimLog) -> String {
    channel_plot(
        log,
        &format!("{}: inputs vs t [s]", log.config.name),
        &INPUT_CHANNELS,
    )
}

/// Overlay of two runs of one scenario: solid `solid`, dashed `dashed`.
pub fn compare_svg(solid: &SimLog, dashed: &SimLog) -> String {
    let channels: Vec<(&str, Channel)> = SAFETY_CHANNELS
        .iter()
        .chain(&ERROR_CHANNELS[..2])
        .copied()
        .collect();
    let panels: Vec<Panel> = channels
        .iter()
        .map(|(name, channel)| {
            let mut series = channel_series(solid, *channel, false, true);
            series.extend(channel_series(dashed, *channel, true, true));
            Panel {
                title: (*name).to_owned(),
                series,
            }
        })
        .collect();
    let mut legend = vehicle_legend(solid.config.n_vehicles(), true);
    legend.push((format!("solid: {}", solid.config.mode), "#000", false));
    legend.push((format!("dashed: {}", dashed.config.mode), "#000", true));
    render_panels(
        &format!(
            "{}: {} vs {}",
            solid.config.name, solid.config.mode, dashed.config.mode
        ),
        &panels,
        &legend,
    )
}

/// x-y view with road edges, reference paths and vehicle trajectories.
pub fn trajectory_svg(log: &SimLog) -> String {
    let mut svg = svg_open(&format!("{}: trajectories (x-y) [m]", log.config.name));
    let mut lines: Vec<Series> = Vec::new();
    for road in &log.config.lanes {
        let path = &road.path;
        let samples = (path.total_length() / 0.5).ceil().max(16.0) as usize;
        let mut center = Vec::with_capacity(samples + 1);
        let mut left = Vec::with_capacity(samples + 1);
        let mut right = Vec::with_capacity(samples + 1);
        for k in 0..=samples {
            let s = path.total_length() * k as f64 / samples as f64;
            let s = if path.is_closed() && k == samples {
                0.0
            } else {
                s
            };
            if let Ok(pose) = path.point_at(s) {
                center.push((pose.position[0], pose.position[1]));
                let [lx, ly] = pose.offset(road.widths.w_left);
                left.push((lx, ly));
                let [rx, ry] = pose.offset(-road.widths.w_right);
                right.push((rx, ry));
            }
        }
        lines.push(Series {
            color: "#000",
            dashed: true,
            points: center,
        });
        for edge in [left, right] {
            lines.push(Series {
                color: "#d00",
                dashed: false,
                points: edge,
            });
        }
    }
    for id in 1..=log.config.n_vehicles() {
        lines.push(Series {
            color: color(id),
            dashed: false,
            points: log
                .records
                .iter()
                .map(|r| (r.vehicles[id - 1].state.x, r.vehicles[id - 1].state.y))
                .collect(),
        });
    }
    let xs = bounds(lines.iter().flat_map(|s| s.points.iter().map(|(x, _)| x)));
    let ys = bounds(lines.iter().flat_map(|s| s.points.iter().map(|(_, y)| y)));
    // equal aspect ratio inside the plot area
    let (left, top, width, height) = (60.0, 40.0, WIDTH - 80.0, HEIGHT - 80.0);
    let scale = (width / (xs.1 - xs.0)).min(height / (ys.1 - ys.0));
    let (cx, cy) = ((xs.0 + xs.1) / 2.0, (ys.0 + ys.1) / 2.0);
    let half = (width / scale / 2.0, height / scale / 2.0);
    let frame = Frame {
        left,
        top,
        width,
        height,
        x: (cx - half.0, cx + half.0),
        y: (cy - half.1, cy + half.1),
    };
    draw_axes(&mut svg, &frame, "");
    for series in &lines {
        draw_series(&mut svg, &frame, series);
    }
    let mut legend = vec![
        ("road edge".to_owned(), "#d00", false),
        ("reference".to_owned(), "#000", true),
    ];
    legend.extend(vehicle_legend(log.config.n_vehicles(), false));
    draw_legend(&mut svg, &legend);
    svg.push_str("</svg>\n");
    svg
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{v:.digits$}"))
}

/// Aligned plain-text table of per-vehicle minima and convergence times.
pub fn summary_table(rows: &[(&str, &Summary)]) -> String {
    let header = [
        "mode",
        "vehicle",
        "min d_rho",
        "min d_eta_L",
        "min d_eta_R",
        "max |theta~|",
        "converged at",
        "breaches",
    ];
    let mut table: Vec<Vec<String>> = vec![header.iter().map(|h| (*h).to_owned()).collect()];
    for (mode, summary) in rows {
        for v in summary.vehicles.iter().skip(1) {
            let breaches: Vec<&str> = [
                DistanceKind::Rho,
                DistanceKind::EtaLeft,
                DistanceKind::EtaRight,
            ]
            .into_iter()
            .filter(|&k| summary.has_breach(v.id, k))
            .map(DistanceKind::label)
            .collect();
            table.push(vec![
                (*mode).to_owned(),
                v.id.to_string(),
                fmt_opt(v.min_d_rho, 3),
                format!("{:.3}", v.min_d_eta_l),
                format!("{:.3}", v.min_d_eta_r),
                format!("{:.4}", v.max_abs_theta_tilde),
                v.convergence_time
                    .map_or_else(|| "never".to_owned(), |t| format!("{t:.1} s")),
                if breaches.is_empty() {
                    "none".to_owned()
                } else {
                    breaches.join(",")
                },
            ]);
        }
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &table {
        let cells: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (cell, w))| {
                if c < 2 {
                    format!("{cell:<w$}")
                } else {
                    format!("{cell:>w$}")
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Writes the CSV and the four plots of one run; returns the file names.
pub fn write_run(log: &SimLog, dir: &Path, stem: &str) -> io::Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let csv_name = format!("{stem}.csv");
    write_csv_file(&log.records, &dir.join(&csv_name))?;
    let mut written = vec![csv_name];
    for (suffix, svg) in [
        ("errors", errors_svg(log)),
        ("safety", safety_svg(log)),
        ("inputs", inputs_svg(log)),
        ("trajectory", trajectory_svg(log)),
    ] {
        let name = format!("{stem}_{suffix}.svg");
        std::fs::write(dir.join(&name), svg)?;
        written.push(name);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_has_nine_significant_digits() {
        assert_eq!(num(10.0), "1.00000000e1");
        assert_eq!(num(-0.0123456789), "-1.23456789e-2");
        assert_eq!(num(f64::NAN), "nan");
    }

    #[test]
    fn bounds_pad_and_handle_flat_data() {
        let (lo, hi) = bounds([0.0, 10.0].iter());
        assert!(lo < 0.0 && hi > 10.0);
        let (lo, hi) = bounds([2.0, 2.0].iter());
        assert!(lo < 2.0 && hi > 2.0);
        assert_eq!(bounds([f64::NAN].iter()), (-1.0, 1.0));
    }
}
