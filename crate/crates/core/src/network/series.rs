use serde::{Deserialize, Serialize};

use super::{build_graph, char_path_length, clustering_coefficient, greedy_partition, modularity, small_world_index, NetworkError};
use crate::par::Execution;
use crate::signal::EegWindow;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// One window's metrics; a field is `None` when undefined for that graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub ts: f64,
    pub q: Option<f64>,
    pub c: Option<f64>,
    pub l: Option<f64>,
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub rows: Vec<MetricRow>,
    /// Start times of windows whose graph had no edges.
    pub gaps: Vec<f64>,
}

fn window_seed(seed: u64, ts: f64) -> u64 {
    // splitmix64 finaliser
    let mut z = seed ^ ts.to_bits();
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn row_for(window: &EegWindow, channels: &[String], threshold: f64, seed: u64) -> Option<MetricRow> {
    let g = build_graph(window, channels, threshold).ok()?;
    if g.edge_count() == 0 {
        return None;
    }
    let q = greedy_partition(&g).and_then(|p| modularity(&g, &p)).ok();
    let c = clustering_coefficient(&g).ok();
    let l = char_path_length(&g).value;
    let sigma = small_world_index(&g, window_seed(seed, window.start_ts)).ok().and_then(|s| s.sigma);
    Some(MetricRow { ts: window.start_ts, q, c, l, sigma })
}

/// Graph metrics for each window, in window order. Windows whose graph has
/// no edges are recorded as gaps.
pub fn metric_series(windows: &[EegWindow], channels: &[String], threshold: f64, seed: u64, exec: Execution) -> MetricSeries {
    let rows = exec.map(windows, |w| row_for(w, channels, threshold, seed));
    let mut out = MetricSeries::default();
    for (w, r) in windows.iter().zip(rows) {
        match r {
            Some(r) => out.rows.push(r),
            None => out.gaps.push(w.start_ts),
        }
    }
    out
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl MetricSeries {
    /// Delimited table `ts,q,c,l,sigma`; undefined values are `NA`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["ts", "q", "c", "l", "sigma"]);
        for r in &self.rows {
            let _ = w.write_record([format!("{:.6}", r.ts), fmt(r.q), fmt(r.c), fmt(r.l), fmt(r.sigma)]);
        }
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    pub fn from_csv(text: &str) -> Result<MetricSeries, NetworkError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| NetworkError::Table(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["ts", "q", "c", "l", "sigma"] {
            return Err(NetworkError::Table(format!("unexpected header {headers:?}")));
        }
        let num = |s: &str| -> Result<Option<f64>, NetworkError> {
            if s == "NA" {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| NetworkError::Table(format!("bad number {s:?}")))
        };
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| NetworkError::Table(e.to_string()))?;
            let ts = num(&rec[0])?.ok_or_else(|| NetworkError::Table("missing ts".into()))?;
            rows.push(MetricRow { ts, q: num(&rec[1])?, c: num(&rec[2])?, l: num(&rec[3])?, sigma: num(&rec[4])? });
        }
        Ok(MetricSeries { rows, gaps: Vec::new() })
    }
}
