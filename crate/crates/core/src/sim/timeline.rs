//! Timeline events and the JSONL / CSV writers.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use super::{RoundRecord, SimError};

/// One timeline entry. `cluster` is `None` for global events.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Event {
    pub t_s: f64,
    pub cluster: Option<u32>,
    pub kind: &'static str,
    pub detail: Value,
}

pub mod kind {
    pub const ROUND_START: &str = "round_start";
    pub const HANDOFF: &str = "handoff";
    pub const RELAY_ONLY: &str = "relay_only";
    pub const SATELLITE_DONE: &str = "satellite_done";
    pub const CLIENT_LOCAL_DONE: &str = "client_local_done";
    pub const CLIENT_UPLOAD_DONE: &str = "client_upload_done";
    pub const CLUSTER_AGGREGATE: &str = "cluster_aggregate";
    pub const GLOBAL_AGGREGATE: &str = "global_aggregate";
}

/// Orders events by (time, cluster, kind). The sort is stable, so events
/// that tie keep their generation order.
pub fn sort_events(events: &mut [Event]) {
    events.sort_by(|a, b| {
        a.t_s
            .total_cmp(&b.t_s)
            .then(a.cluster.cmp(&b.cluster))
            .then(a.kind.cmp(b.kind))
    });
}

pub fn write_timeline(events: &[Event], mut w: impl Write) -> Result<(), SimError> {
    for e in events {
        serde_json::to_writer(&mut w, e).map_err(|e| SimError::Output(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// `round,clock_s,accuracy,loss,tau_round_s`; accuracy and loss are empty
/// when the run has no learning attached.
pub fn write_metrics(records: &[RoundRecord], w: impl Write) -> Result<(), SimError> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| SimError::Output(e.to_string());
    out.write_record(["round", "clock_s", "accuracy", "loss", "tau_round_s"])
        .map_err(err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        out.write_record([
            r.round.to_string(),
            r.clock_s.to_string(),
            opt(r.accuracy),
            opt(r.loss),
            r.tau_round_s.to_string(),
        ])
        .map_err(err)?;
    }
    out.flush()?;
    Ok(())
}

/// One row of a metrics CSV.
#[derive(Clone, Debug, PartialEq, serde::Deserialize)]
pub struct MetricsRow {
    pub round: usize,
    pub clock_s: f64,
    pub accuracy: Option<f64>,
    pub loss: Option<f64>,
    pub tau_round_s: f64,
}

pub fn read_metrics(r: impl std::io::Read) -> Result<Vec<MetricsRow>, SimError> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<Result<Vec<MetricsRow>, _>>()
        .map_err(|e| SimError::Output(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn ordering_is_time_cluster_kind() {
        let e = |t: f64, c: Option<u32>, k: &'static str| Event {
            t_s: t,
            cluster: c,
            kind: k,
            detail: json!({}),
        };
        let mut v = vec![
            e(2.0, Some(1), kind::HANDOFF),
            e(1.0, Some(0), kind::SATELLITE_DONE),
            e(1.0, Some(0), kind::HANDOFF),
            e(1.0, None, kind::ROUND_START),
        ];
        sort_events(&mut v);
        let got: Vec<_> = v.iter().map(|e| (e.t_s, e.cluster, e.kind)).collect();
        assert_eq!(
            got,
            vec![
                (1.0, None, kind::ROUND_START),
                (1.0, Some(0), kind::HANDOFF),
                (1.0, Some(0), kind::SATELLITE_DONE),
                (2.0, Some(1), kind::HANDOFF),
            ]
        );
        let mut buf = Vec::new();
        write_timeline(&v[..1], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"t_s\":1.0,\"cluster\":null,\"kind\":\"round_start\",\"detail\":{}}\n"
        );
    }
}
