//! Minimal in-process SVG line charts.
//!
//! CSV output is the source of truth; these charts are reading aids
//! (metric-vs-gamma curves with standard-error bands and CATE overlays).

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;

pub const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Optional (lower, upper) band around the line.
    pub band: Option<(Vec<f64>, Vec<f64>)>,
    pub color: String,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Dashed vertical marker with a label (e.g. an analytic root).
    pub vline: Option<(f64, String)>,
}

struct Bounds {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Bounds {
    fn of(chart: &Chart) -> Bounds {
        let mut b = Bounds {
            x_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        };
        for s in &chart.series {
            for &x in &s.xs {
                b.x_min = b.x_min.min(x);
                b.x_max = b.x_max.max(x);
            }
            for &y in &s.ys {
                b.y_min = b.y_min.min(y);
                b.y_max = b.y_max.max(y);
            }
            if let Some((lo, hi)) = &s.band {
                for &y in lo.iter().chain(hi.iter()) {
                    b.y_min = b.y_min.min(y);
                    b.y_max = b.y_max.max(y);
                }
            }
        }
        if let Some((x, _)) = &chart.vline {
            b.x_min = b.x_min.min(*x);
            b.x_max = b.x_max.max(*x);
        }
        if !b.x_min.is_finite() || b.x_min == b.x_max {
            b.x_min -= 0.5;
            b.x_max += 0.5;
        }
        if !b.y_min.is_finite() || b.y_min == b.y_max {
            b.y_min -= 0.5;
            b.y_max += 0.5;
        }
        let pad_x = 0.04 * (b.x_max - b.x_min);
        let pad_y = 0.08 * (b.y_max - b.y_min);
        b.x_min -= pad_x;
        b.x_max += pad_x;
        b.y_min -= pad_y;
        b.y_max += pad_y;
        b
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN_LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN_BOTTOM
            - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        format!("{v:.3}")
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string()
    } else {
        format!("{v:.2e}")
    }
}

impl Chart {
    pub fn render(&self) -> String {
        let b = Bounds::of(self);
        let mut out = String::with_capacity(8192);
        out.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
        ));
        out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
        out.push_str(&format!(
            "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
            WIDTH / 2.0,
            escape(&self.title)
        ));

        // axes
        let (x0, y0) = (MARGIN_LEFT, HEIGHT - MARGIN_BOTTOM);
        let (x1, y1) = (WIDTH - MARGIN_RIGHT, MARGIN_TOP);
        out.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n"
        ));
        out.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
        ));

        // ticks
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = b.x_min + t * (b.x_max - b.x_min);
            let px = b.px(xv);
            out.push_str(&format!(
                "<line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n",
                y0 + 4.0
            ));
            out.push_str(&format!(
                "<text x=\"{px}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
                y0 + 18.0,
                fmt_tick(xv)
            ));
            let yv = b.y_min + t * (b.y_max - b.y_min);
            let py = b.py(yv);
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>\n",
                x0 - 4.0
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
                x0 - 8.0,
                py + 4.0,
                fmt_tick(yv)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
            (x0 + x1) / 2.0,
            HEIGHT - 10.0,
            escape(&self.x_label)
        ));
        out.push_str(&format!(
            "<text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            escape(&self.y_label)
        ));

        if let Some((xv, label)) = &self.vline {
            let px = b.px(*xv);
            out.push_str(&format!(
                "<line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{y1}\" stroke=\"#555\" stroke-dasharray=\"5,4\"/>\n"
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#555\">{}</text>\n",
                px + 4.0,
                y1 + 12.0,
                escape(label)
            ));
        }

        for s in &self.series {
            if let Some((lo, hi)) = &s.band {
                let mut d = String::from("M");
                for (i, (&x, &y)) in s.xs.iter().zip(hi.iter()).enumerate() {
                    if i > 0 {
                        d.push('L');
                    }
                    d.push_str(&format!("{:.2},{:.2} ", b.px(x), b.py(y)));
                }
                for (&x, &y) in s.xs.iter().zip(lo.iter()).rev() {
                    d.push_str(&format!("L{:.2},{:.2} ", b.px(x), b.py(y)));
                }
                d.push('Z');
                out.push_str(&format!(
                    "<path d=\"{d}\" fill=\"{}\" fill-opacity=\"0.15\" stroke=\"none\"/>\n",
                    s.color
                ));
            }
            let pts: Vec<String> = s
                .xs
                .iter()
                .zip(s.ys.iter())
                .map(|(&x, &y)| format!("{:.2},{:.2}", b.px(x), b.py(y)))
                .collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.8\"/>\n",
                pts.join(" "),
                s.color
            ));
        }

        // legend
        for (i, s) in self.series.iter().enumerate() {
            let ly = MARGIN_TOP + 14.0 * i as f64 + 4.0;
            let lx = WIDTH - MARGIN_RIGHT - 150.0;
            out.push_str(&format!(
                "<line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                lx + 22.0,
                s.color
            ));
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
                lx + 28.0,
                ly + 4.0,
                escape(&s.label)
            ));
        }
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
