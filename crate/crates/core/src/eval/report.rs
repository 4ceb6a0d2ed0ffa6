use super::{EvalError, MetricSet, Result};

pub const METRIC_NAMES: [&str; 5] = ["accuracy", "precision", "recall", "f1", "auc"];

/// Per-fold metrics for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub variant: String,
    pub folds: Vec<MetricSet>,
}

impl CvReport {
    pub fn mean(&self) -> [f64; 5] {
        let mut out = [0.0; 5];
        for m in &self.folds {
            for (o, v) in out.iter_mut().zip(m.values()) {
                *o += v;
            }
        }
        out.map(|s| s / self.folds.len() as f64)
    }

    /// Sample standard deviation (k - 1 denominator); 0 for a single fold.
    pub fn std(&self) -> [f64; 5] {
        let mean = self.mean();
        let k = self.folds.len();
        if k < 2 {
            return [0.0; 5];
        }
        let mut out = [0.0; 5];
        for m in &self.folds {
            for ((o, v), mu) in out.iter_mut().zip(m.values()).zip(mean) {
                *o += (v - mu) * (v - mu);
            }
        }
        out.map(|s| (s / (k - 1) as f64).sqrt())
    }
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

/// `variant,fold,accuracy,precision,recall,f1,auc`
pub fn fold_csv(reports: &[CvReport]) -> String {
    let mut w = writer();
    w.write_record(["variant", "fold"].iter().chain(METRIC_NAMES.iter())).unwrap();
    for r in reports {
        for (fold, m) in r.folds.iter().enumerate() {
            let mut row = vec![r.variant.clone(), fold.to_string()];
            row.extend(m.values().iter().map(|v| v.to_string()));
            w.write_record(&row).unwrap();
        }
    }
    finish(w)
}

/// `variant,metric,mean,std`
pub fn summary_csv(reports: &[CvReport]) -> String {
    let mut w = writer();
    w.write_record(["variant", "metric", "mean", "std"]).unwrap();
    for r in reports {
        let (mean, std) = (r.mean(), r.std());
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            w.write_record([r.variant.as_str(), name, &mean[i].to_string(), &std[i].to_string()])
                .unwrap();
        }
    }
    finish(w)
}

/// Parses the per-fold CSV back into reports, preserving variant order.
pub fn read_fold_csv(text: &str) -> Result<Vec<CvReport>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| EvalError::Report(e.to_string()))?.clone();
    let expected: Vec<&str> = ["variant", "fold"].iter().chain(METRIC_NAMES.iter()).copied().collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(EvalError::Report(format!("unexpected header {:?}", headers)));
    }
    let mut reports: Vec<CvReport> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| EvalError::Report(e.to_string()))?;
        let variant = &rec[0];
        let mut values = [0.0; 5];
        for (i, v) in values.iter_mut().enumerate() {
            *v = rec[i + 2]
                .parse()
                .map_err(|_| EvalError::Report(format!("row {}: bad {} value {:?}", line + 2, METRIC_NAMES[i], &rec[i + 2])))?;
        }
        let m = MetricSet::from_values(values);
        match reports.iter_mut().find(|r| r.variant == variant) {
            Some(r) => r.folds.push(m),
            None => reports.push(CvReport {
                variant: variant.to_string(),
                folds: vec![m],
            }),
        }
    }
    Ok(reports)
}

/// Aligned text table, one row per variant, `mean ± std` per metric.
pub fn render_table(reports: &[CvReport]) -> String {
    let header = ["Model", "Acc.", "Prec.", "Rec.", "F1", "AUC"];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let (mean, std) = (r.mean(), r.std());
            std::iter::once(r.variant.clone())
                .chain((0..5).map(|i| format!("{:.3} ± {:.3}", mean[i], std[i])))
                .collect()
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
            .collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in &rows {
        out.push_str(&line(r.iter().map(|s| s.as_str()).collect()));
    }
    out
}
