//! Static SVG figures and the tables behind them.
//!
//! Every figure is written next to a CSV holding exactly the plotted values.

use anyhow::{anyhow, Result};
use plotters::prelude::*;

use nbprofile_core::runlog::{CellStats, RunLog};

use crate::report::{num, Table};
use crate::Provenance;

/// Intervals grouped into one plotted point.
pub const BUCKET: usize = 10;

const SIZE: (u32, u32) = (800, 500);

type Curve = (&'static str, RGBColor, fn(&BucketRow) -> f64);

/// Observables of one neighborhood over `BUCKET` consecutive intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketRow {
    /// 1-based bucket index; bucket `b` covers intervals `10(b-1)+1 ..= 10b`.
    pub bucket: usize,
    pub n_iters: u64,
    /// Count-weighted ratios, 0 when the bucket is empty.
    pub r_improve: f64,
    pub r_worsen: f64,
    pub r_nothing: f64,
    /// Average magnitudes, NaN when undefined.
    pub mean_improve: f64,
    pub mean_worsen: f64,
    pub mean_time_ns: f64,
}

/// Buckets the first `n_intervals` intervals of one neighborhood.
pub fn neighborhood_buckets(log: &RunLog, nbh: usize, n_intervals: usize) -> Vec<BucketRow> {
    let n_buckets = n_intervals.div_ceil(BUCKET);
    (1..=n_buckets)
        .map(|b| {
            let mut t = CellStats::default();
            for i in (b - 1) * BUCKET + 1..=(b * BUCKET).min(n_intervals) {
                let c = log.cell(nbh, i);
                t.n_iters += c.n_iters;
                t.n_improve += c.n_improve;
                t.n_nothing += c.n_nothing;
                t.n_worsen += c.n_worsen;
                t.s_improve += c.s_improve;
                t.s_worsen += c.s_worsen;
                t.s_time_ns += c.s_time_ns;
            }
            let ratio = |k: u64| {
                if t.n_iters == 0 {
                    0.0
                } else {
                    k as f64 / t.n_iters as f64
                }
            };
            let mean = |s: f64, k: u64| if k == 0 { f64::NAN } else { s / k as f64 };
            BucketRow {
                bucket: b,
                n_iters: t.n_iters,
                r_improve: ratio(t.n_improve),
                r_worsen: ratio(t.n_worsen),
                r_nothing: ratio(t.n_nothing),
                mean_improve: mean(t.s_improve, t.n_improve),
                mean_worsen: mean(t.s_worsen, t.n_worsen),
                mean_time_ns: mean(t.s_time_ns as f64, t.n_iters),
            }
        })
        .collect()
}

pub fn bucket_table(rows: &[BucketRow]) -> Table {
    let mut t = Table::new(&[
        "bucket",
        "n_iters",
        "r_improve",
        "r_worsen",
        "r_nothing",
        "mean_improve",
        "mean_worsen",
        "mean_time_ns",
    ]);
    for r in rows {
        t.push(vec![
            r.bucket.to_string(),
            r.n_iters.to_string(),
            num(r.r_improve),
            num(r.r_worsen),
            num(r.r_nothing),
            num(r.mean_improve),
            num(r.mean_worsen),
            num(r.mean_time_ns),
        ]);
    }
    t
}

pub fn activity_table(activity: &[u64], frame_ends: &[usize]) -> Table {
    let mut t = Table::new(&["interval", "sum_n_iters", "frame_end"]);
    for (i, a) in activity.iter().enumerate() {
        let end = frame_ends.contains(&(i + 1));
        t.push(vec![(i + 1).to_string(), a.to_string(), u8::from(end).to_string()]);
    }
    t
}

fn stamp(svg: String, provenance: &Provenance) -> String {
    format!("<!--{} -->\n{svg}", provenance.comment_line(""))
}

fn plot_err<E: std::fmt::Debug>(e: E) -> anyhow::Error {
    anyhow!("drawing failed: {e:?}")
}

/// Ratio curves of one neighborhood; an empty neighborhood gets flat zero
/// curves and a "no data" note.
pub fn render_neighborhood(title: &str, rows: &[BucketRow], provenance: &Provenance) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let x_max = rows.len().max(1) as f64 + 0.5;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(50)
            .build_cartesian_2d(0.5f64..x_max, 0f64..1f64)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("interval bucket (10 intervals, worst to best quality)")
            .y_desc("ratio")
            .draw()
            .map_err(plot_err)?;
        let series: [Curve; 3] = [
            ("r_improve", GREEN, |r| r.r_improve),
            ("r_worsen", RED, |r| r.r_worsen),
            ("r_nothing", BLUE, |r| r.r_nothing),
        ];
        for (label, color, get) in series {
            chart
                .draw_series(LineSeries::new(rows.iter().map(|r| (r.bucket as f64, get(r))), color))
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
        if rows.iter().all(|r| r.n_iters == 0) {
            root.draw(&Text::new(
                "no data",
                (SIZE.0 as i32 / 2 - 30, SIZE.1 as i32 / 2),
                ("sans-serif", 24),
            ))
            .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(stamp(svg, provenance))
}

/// Total applications per interval with frame ends as vertical lines.
pub fn render_activity(title: &str, activity: &[u64], frame_ends: &[usize], provenance: &Provenance) -> Result<String> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let y_max = activity.iter().copied().max().unwrap_or(0).max(1) as f64 * 1.05;
        let x_max = activity.len().max(1) as f64 + 0.5;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(0.5f64..x_max, 0f64..y_max)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc("interval")
            .y_desc("sum of applications")
            .draw()
            .map_err(plot_err)?;
        chart
            .draw_series(LineSeries::new(
                activity.iter().enumerate().map(|(i, &a)| ((i + 1) as f64, a as f64)),
                BLUE,
            ))
            .map_err(plot_err)?;
        for &e in frame_ends {
            let x = e as f64 + 0.5;
            chart
                .draw_series(LineSeries::new(vec![(x, 0.0), (x, y_max)], RED.stroke_width(1)))
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(stamp(svg, provenance))
}

/// One box per series plus an optional horizontal reference line.
pub fn render_boxplot(
    title: &str,
    series: &[(String, Vec<f64>)],
    reference: Option<(&str, f64)>,
    provenance: &Provenance,
) -> Result<String> {
    let values = series
        .iter()
        .flat_map(|s| s.1.iter().copied())
        .chain(reference.map(|r| r.1));
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 1.0) };
    let pad = ((hi - lo) * 0.1).max(1e-3);
    let (y_lo, y_hi) = ((lo - pad) as f32, (hi + pad) as f32);
    let names: Vec<String> = series.iter().map(|s| s.0.clone()).collect();
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 500)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d((0..series.len()).into_segmented(), y_lo..y_hi)
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .disable_x_mesh()
            .x_labels(series.len().max(1))
            .x_label_formatter(&|v| match v {
                SegmentValue::CenterOf(i) => names.get(*i).cloned().unwrap_or_default(),
                _ => String::new(),
            })
            .y_desc("mean optimality gap (%)")
            .draw()
            .map_err(plot_err)?;
        for (i, (_, vals)) in series.iter().enumerate() {
            if vals.is_empty() {
                continue;
            }
            let q = Quartiles::new(vals);
            chart
                .draw_series(std::iter::once(Boxplot::new_vertical(SegmentValue::CenterOf(i), &q)))
                .map_err(plot_err)?;
        }
        if let Some((label, y)) = reference {
            let y = y as f32;
            chart
                .draw_series(LineSeries::new(
                    vec![(SegmentValue::Exact(0), y), (SegmentValue::Last, y)],
                    BLACK.stroke_width(1),
                ))
                .map_err(plot_err)?
                .label(label)
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLACK));
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    Ok(stamp(svg, provenance))
}
