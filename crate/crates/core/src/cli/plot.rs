//! Plain-text SVG: training curves and the confusion heatmap.

use std::fmt::Write;

use crate::train_eval::{EvalReport, TrainHistory};

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Panel {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl Panel {
    fn line(&self, svg: &mut String, xs: &[f64], ys: &[f64], x_max: f64, y_max: f64, color: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&a, &b)| {
                let px = self.x + self.w * if x_max > 1.0 { (a - 1.0) / (x_max - 1.0) } else { 0.5 };
                let py = self.y + self.h * (1.0 - b / y_max);
                format!("{px:.1},{py:.1}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            pts.join(" ")
        );
    }

    fn axes(&self, svg: &mut String, title: &str, x_max: f64, y_max: f64) {
        let (x0, y0, x1, y1) = (self.x, self.y, self.x + self.w, self.y + self.h);
        let _ = writeln!(
            svg,
            r#"<rect x="{x0}" y="{y0}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            self.w, self.h
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, x0 + self.w / 2.0, y0 - 10.0, escape(title));
        for i in 0..=4 {
            let frac = i as f64 / 4.0;
            let y = y1 - frac * self.h;
            let _ = writeln!(svg, r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/>"##);
            let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="11">{:.2}</text>"#, x0 - 5.0, y + 4.0, frac * y_max);
        }
        let _ = writeln!(svg, r#"<text x="{x0}" y="{}" font-size="11">1</text>"#, y1 + 15.0);
        let _ = writeln!(svg, r#"<text x="{x1}" y="{}" text-anchor="end" font-size="11">{x_max}</text>"#, y1 + 15.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">epoch</text>"#, x0 + self.w / 2.0, y1 + 30.0);
    }
}

/// Two panels: accuracy and loss against epoch, train and validation curves each.
pub fn curves_svg(history: &TrainHistory) -> String {
    let (w, h) = (900.0, 380.0);
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif">"#
    );
    svg.push('\n');
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let epochs: Vec<f64> = history.records.iter().map(|r| r.epoch as f64).collect();
    let x_max = epochs.last().copied().unwrap_or(1.0);
    let get = |f: fn(&crate::train_eval::EpochRecord) -> f64| -> Vec<f64> { history.records.iter().map(f).collect() };
    let (ta, va, tl, vl) = (get(|r| r.train_acc), get(|r| r.val_acc), get(|r| r.train_loss), get(|r| r.val_loss));
    let loss_max = tl.iter().chain(&vl).cloned().fold(0.0f64, f64::max).max(1e-6) * 1.05;

    let acc = Panel { x: 60.0, y: 40.0, w: 340.0, h: 260.0 };
    acc.axes(&mut svg, "accuracy", x_max, 1.0);
    acc.line(&mut svg, &epochs, &ta, x_max, 1.0, "#1f77b4");
    acc.line(&mut svg, &epochs, &va, x_max, 1.0, "#ff7f0e");

    let loss = Panel { x: 510.0, y: 40.0, w: 340.0, h: 260.0 };
    loss.axes(&mut svg, "loss", x_max, loss_max);
    loss.line(&mut svg, &epochs, &tl, x_max, loss_max, "#1f77b4");
    loss.line(&mut svg, &epochs, &vl, x_max, loss_max, "#ff7f0e");

    for (i, (name, color)) in [("train", "#1f77b4"), ("validation", "#ff7f0e")].iter().enumerate() {
        let y = 355.0;
        let x = 350.0 + 120.0 * i as f64;
        let _ = writeln!(svg, r#"<rect x="{x}" y="{}" width="14" height="4" fill="{color}"/>"#, y - 4.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{y}" font-size="12">{name}</text>"#, x + 20.0);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Heatmap of the confusion matrix with genre-labelled axes.
pub fn confusion_svg(report: &EvalReport) -> String {
    let g = report.genres.len();
    let cell = 44.0;
    let margin = 170.0;
    let size = margin + cell * g as f64 + 20.0;
    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif">"#
    );
    svg.push('\n');
    let _ = writeln!(svg, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let max = report.confusion.iter().flatten().copied().max().unwrap_or(0).max(1) as f64;
    for (i, row) in report.confusion.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let shade = 255 - (v as f64 / max * 200.0).round() as u8;
            let (x, y) = (margin + j as f64 * cell, margin + i as f64 * cell);
            let _ = writeln!(
                svg,
                r#"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({shade},{shade},255)" stroke="white"/>"#
            );
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{v}</text>"#,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    for (k, name) in report.genres.iter().enumerate() {
        let c = margin + k as f64 * cell + cell / 2.0;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end" font-size="12">{}</text>"#, margin - 6.0, c + 4.0, escape(name));
        let _ = writeln!(
            svg,
            r#"<text x="{c}" y="{}" text-anchor="start" font-size="12" transform="rotate(-60 {c} {})">{}</text>"#,
            margin - 6.0,
            margin - 6.0,
            escape(name)
        );
    }
    let _ = writeln!(svg, r#"<text x="12" y="{}" font-size="13" transform="rotate(-90 12 {})">true</text>"#, margin + 40.0, margin + 40.0);
    let _ = writeln!(svg, r#"<text x="{}" y="16" font-size="13">predicted</text>"#, margin);
    svg.push_str("</svg>\n");
    svg
}
