//! CSV and aligned-text renderings of run results.

use ovsr_core::metrics::{format_db, EvalReport};
use ovsr_core::training::TrainRecord;

/// Pads every column to its widest cell; the first column is left-aligned,
/// the rest right-aligned.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if c == 0 {
                    format!("{s:<w$}", w = widths[c])
                } else {
                    format!("{s:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// `iteration,lr,loss,eval_psnr`; `eval_psnr` is empty on rows without an
/// evaluation. Floats use the shortest exact representation.
pub fn loss_csv(records: &[TrainRecord]) -> String {
    let mut out = String::from("iteration,lr,loss,eval_psnr\n");
    for r in records {
        let eval = r.eval_psnr.map(|p| if p.is_infinite() { "inf".into() } else { p.to_string() });
        out.push_str(&format!("{},{},{},{}\n", r.iteration, r.lr, r.loss, eval.unwrap_or_default()));
    }
    out
}

/// One row per sequence, then a `mean` row.
pub fn eval_csv(report: &EvalReport) -> String {
    let mut out = String::from("model,sequence,frames,psnr,ssim\n");
    for s in &report.sequences {
        out.push_str(&format!(
            "{},{},{},{},{:.6}\n",
            report.model,
            s.name,
            s.frames,
            format_db(s.psnr, 4),
            s.ssim
        ));
    }
    let frames: usize = report.sequences.iter().map(|s| s.frames).sum();
    out.push_str(&format!(
        "{},mean,{frames},{},{:.6}\n",
        report.model,
        format_db(report.mean_psnr(), 4),
        report.mean_ssim()
    ));
    out
}

/// Summary in the column order Model, Parameter (M), FLOPs (T), Time (ms) /
/// FPS, PSNR, SSIM, followed by the per-sequence scores.
pub fn eval_table(report: &EvalReport) -> String {
    let mut head = vec![
        "Model".to_string(),
        "Parameter (M)".into(),
        "FLOPs (T)".into(),
        "Time (ms) / FPS".into(),
        "PSNR (dB)".into(),
        "SSIM".into(),
    ];
    let mut row = vec![report.model.clone()];
    let mut note = String::new();
    match &report.complexity {
        Some(c) => {
            head[2] = format!("FLOPs (T) {}x{}", c.flops_resolution.0, c.flops_resolution.1);
            row.push(format!("{:.3}", c.parameters as f64 / 1e6));
            row.push(format!("{:.3}", c.flops as f64 / 1e12));
            row.push(match (c.ms_per_frame, c.fps()) {
                (Some(ms), Some(fps)) => format!("{ms:.1} / {fps:.2}"),
                _ => "-".into(),
            });
            note.push_str("FLOPs count one multiply-accumulate as one FLOP.\n");
        }
        None => row.extend(["-".to_string(), "-".into(), "-".into()]),
    }
    row.push(format_db(report.mean_psnr(), 2));
    row.push(format!("{:.4}", report.mean_ssim()));
    let mut out = align(&[head, row]);
    out.push_str(&note);
    out.push('\n');
    let mut rows = vec![vec!["Sequence".to_string(), "Frames".into(), "PSNR (dB)".into(), "SSIM".into()]];
    for s in &report.sequences {
        rows.push(vec![s.name.clone(), s.frames.to_string(), format_db(s.psnr, 2), format!("{:.4}", s.ssim)]);
    }
    out.push_str(&align(&rows));
    out
}

/// PSNR with every input present and with single inputs removed, one column
/// per network the removal applies to. `None` marks inputs the column's
/// networks never read.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub model: String,
    pub columns: Vec<String>,
    pub full: f64,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

impl AblationGrid {
    pub fn to_table(&self) -> String {
        let mut head = vec![self.model.clone()];
        head.extend(self.columns.iter().cloned());
        let mut rows = vec![head];
        let mut full = vec!["Full".to_string()];
        full.extend(self.columns.iter().map(|_| format_db(self.full, 2)));
        rows.push(full);
        for (label, cells) in &self.rows {
            let mut row = vec![format!("w/o {label}")];
            row.extend(cells.iter().map(|c| match c {
                Some(p) => format!("{} ({:+.2})", format_db(*p, 2), p - self.full),
                None => "-".into(),
            }));
            rows.push(row);
        }
        align(&rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("removed,network,psnr,delta\n");
        for c in &self.columns {
            out.push_str(&format!("none,{c},{},0\n", format_db(self.full, 4)));
        }
        for (label, cells) in &self.rows {
            for (c, cell) in self.columns.iter().zip(cells) {
                match cell {
                    Some(p) => out.push_str(&format!("{label},{c},{},{:.4}\n", format_db(*p, 4), p - self.full)),
                    None => out.push_str(&format!("{label},{c},-,-\n")),
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub setting: String,
    pub model: String,
    pub parameters: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Rows in the order given plus a rank column (1 = best PSNR).
pub fn sweep_table(axis: &str, rows: &[SweepRow]) -> String {
    let ranks = ranks(rows);
    let mut out = vec![vec![
        axis.to_string(),
        "Model".into(),
        "Parameter (M)".into(),
        "PSNR (dB)".into(),
        "SSIM".into(),
        "Rank".into(),
    ]];
    for (r, rank) in rows.iter().zip(ranks) {
        out.push(vec![
            r.setting.clone(),
            r.model.clone(),
            format!("{:.3}", r.parameters as f64 / 1e6),
            format_db(r.psnr, 2),
            format!("{:.4}", r.ssim),
            rank.to_string(),
        ]);
    }
    align(&out)
}

pub fn sweep_csv(axis: &str, rows: &[SweepRow]) -> String {
    let mut out = format!("{axis},model,parameters,psnr,ssim,rank\n");
    for (r, rank) in rows.iter().zip(ranks(rows)) {
        out.push_str(&format!(
            "{},{},{},{},{:.6},{rank}\n",
            r.setting,
            r.model,
            r.parameters,
            format_db(r.psnr, 4),
            r.ssim
        ));
    }
    out
}

fn ranks(rows: &[SweepRow]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| rows[b].psnr.total_cmp(&rows[a].psnr).then(a.cmp(&b)));
    let mut rank = vec![0; rows.len()];
    for (r, i) in order.into_iter().enumerate() {
        rank[i] = r + 1;
    }
    rank
}
