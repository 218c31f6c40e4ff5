use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use plotters::prelude::*;

use super::{AlgorithmKind, HarnessError, TrialRecord};

pub const CSV_HEADER: [&str; 14] = [
    "trial",
    "seed",
    "snr_db",
    "n_ris",
    "k_users",
    "sigma_eps2",
    "algorithm",
    "objective",
    "sum_rate",
    "ee",
    "total_tx_power",
    "iters",
    "runtime_ms",
    "feasible",
];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv { path: path.to_path_buf(), source }
}

/// Writes the records as CSV to any writer. Rate columns run to the largest
/// rate vector present and are blank-padded.
pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<(), csv::Error> {
    let k_max = records.iter().map(|r| r.rates.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = CSV_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((1..=k_max).map(|k| format!("rate_{k}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.trial.to_string(),
            r.seed.to_string(),
            r.snr_db.to_string(),
            r.n_ris.to_string(),
            r.k_users.to_string(),
            r.sigma_eps2.to_string(),
            r.algorithm.to_string(),
            r.objective.to_string(),
            r.sum_rate.to_string(),
            r.ee.to_string(),
            r.total_tx_power.to_string(),
            r.iters.to_string(),
            r.runtime_ms.map(|v| v.to_string()).unwrap_or_default(),
            r.feasible.to_string(),
        ];
        row.extend((0..k_max).map(|k| r.rates.get(k).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(records: &[TrialRecord], path: &Path) -> Result<(), HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::Empty);
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = fs::File::create(path).map_err(io_err(path))?;
    write_csv(records, std::io::BufWriter::new(file)).map_err(csv_err(path))
}

pub fn parse_csv(path: &Path) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = reader.headers().map_err(csv_err(path))?.clone();
    if headers.len() < CSV_HEADER.len() || headers.iter().zip(CSV_HEADER).any(|(a, b)| a != b) {
        return Err(HarnessError::Record { path: path.to_path_buf(), row: 0, message: "unexpected header".into() });
    }
    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err(path))?;
        let bad = |message: String| HarnessError::Record { path: path.to_path_buf(), row: idx + 1, message };
        let field = |i: usize| row.get(i).unwrap_or("");
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, String> {
            s.parse().map_err(|_| format!("bad {name} `{s}`"))
        }
        let parsed = (|| -> Result<TrialRecord, String> {
            Ok(TrialRecord {
                trial: num(field(0), "trial")?,
                seed: num(field(1), "seed")?,
                snr_db: num(field(2), "snr_db")?,
                n_ris: num(field(3), "n_ris")?,
                k_users: num(field(4), "k_users")?,
                sigma_eps2: num(field(5), "sigma_eps2")?,
                algorithm: field(6).parse::<AlgorithmKind>()?,
                objective: num(field(7), "objective")?,
                sum_rate: num(field(8), "sum_rate")?,
                ee: num(field(9), "ee")?,
                total_tx_power: num(field(10), "total_tx_power")?,
                iters: num(field(11), "iters")?,
                runtime_ms: if field(12).is_empty() { None } else { Some(num(field(12), "runtime_ms")?) },
                feasible: num(field(13), "feasible")?,
                rates: (CSV_HEADER.len()..row.len())
                    .map(|i| field(i))
                    .take_while(|s| !s.is_empty())
                    .map(|s| num(s, "rate"))
                    .collect::<Result<_, _>>()?,
            })
        })();
        records.push(parsed.map_err(bad)?);
    }
    Ok(records)
}

/// Which CSV columns go on the axes, and optional `column=value` row filters.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub x: String,
    pub y: String,
    pub series: String,
    pub filters: Vec<(String, String)>,
    pub title: String,
}

/// One curve: `(x, mean, std)` per distinct x value.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64)>,
}

/// Groups the CSV rows by series and x value and reduces y to mean and
/// population standard deviation. Non-finite y values are skipped.
pub fn summarize(csv_path: &Path, spec: &PlotSpec) -> Result<Vec<Series>, HarnessError> {
    let mut reader = csv::Reader::from_path(csv_path).map_err(csv_err(csv_path))?;
    let headers = reader.headers().map_err(csv_err(csv_path))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| HarnessError::MissingColumn(name.into()));
    let (xi, yi, si) = (col(&spec.x)?, col(&spec.y)?, col(&spec.series)?);
    let filters = spec.filters.iter().map(|(k, v)| Ok((col(k)?, v.as_str()))).collect::<Result<Vec<_>, HarnessError>>()?;
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, Vec<f64>)>> = BTreeMap::new();
    for (idx, row) in reader.records().enumerate() {
        let row = row.map_err(csv_err(csv_path))?;
        if filters.iter().any(|(i, v)| row.get(*i) != Some(*v)) {
            continue;
        }
        let bad = |what: &str| HarnessError::Record {
            path: csv_path.to_path_buf(),
            row: idx + 1,
            message: format!("{what} is not numeric"),
        };
        let x: f64 = row[xi].parse().map_err(|_| bad(&spec.x))?;
        let y: f64 = match row[yi].parse() {
            Ok(v) => v,
            Err(_) if row[yi].is_empty() => continue,
            Err(_) => return Err(bad(&spec.y)),
        };
        if !y.is_finite() {
            continue;
        }
        // order x numerically; the key maps f64 to a sortable integer
        let key = if x.is_sign_negative() { !x.to_bits() } else { x.to_bits() | (1 << 63) };
        groups.entry(row[si].to_string()).or_default().entry(key).or_insert((x, Vec::new())).1.push(y);
    }
    Ok(groups
        .into_iter()
        .map(|(label, xs)| Series {
            label,
            points: xs
                .into_values()
                .map(|(x, ys)| {
                    let n = ys.len() as f64;
                    let mean = ys.iter().sum::<f64>() / n;
                    let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
                    (x, mean, var.sqrt())
                })
                .collect(),
        })
        .collect())
}

/// Line chart of mean y with a mean +/- std band per series, as SVG.
pub fn emit_plot(csv_path: &Path, spec: &PlotSpec, out: &Path) -> Result<Vec<Series>, HarnessError> {
    let series = summarize(csv_path, spec)?;
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, m, s) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(m - s);
        y1 = y1.max(m + s);
    }
    if !x0.is_finite() {
        return Err(HarnessError::Plot("no rows matched".into()));
    }
    if x1 - x0 < 1e-12 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-9);
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let plot_err = |e: &dyn std::fmt::Display| HarnessError::Plot(e.to_string());
    {
        let root = SVGBackend::new(out, (800, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| plot_err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(&spec.title, ("sans-serif", 22))
            .margin(16)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
            .map_err(|e| plot_err(&e))?;
        chart
            .configure_mesh()
            .x_desc(spec.x.as_str())
            .y_desc(spec.y.as_str())
            .draw()
            .map_err(|e| plot_err(&e))?;
        for (i, s) in series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let mut band: Vec<(f64, f64)> = s.points.iter().map(|&(x, m, sd)| (x, m + sd)).collect();
            band.extend(s.points.iter().rev().map(|&(x, m, sd)| (x, m - sd)));
            chart.draw_series(std::iter::once(Polygon::new(band, color.mix(0.15)))).map_err(|e| plot_err(&e))?;
            chart
                .draw_series(LineSeries::new(s.points.iter().map(|&(x, m, _)| (x, m)), color.stroke_width(2)))
                .map_err(|e| plot_err(&e))?
                .label(format!("{} = {}", spec.series, s.label))
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
            chart
                .draw_series(s.points.iter().map(|&(x, m, _)| Circle::new((x, m), 3, color.filled())))
                .map_err(|e| plot_err(&e))?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| plot_err(&e))?;
        root.present().map_err(|e| plot_err(&e))?;
    }
    Ok(series)
}
