//! CSV outputs. Every writer returns a `String` with a header row, LF line
//! endings and shortest round-trip float formatting, so identical runs give
//! identical bytes. Missing values are written as `NA`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::engine::{SafetyKind, SimulationOutput};
use crate::metrics::{display_percent, percent_change, summarize, SummaryRow};
use crate::network::{EdgeId, Network};

pub const NA: &str = "NA";

pub const TRIPS_FILE: &str = "trips.csv";
pub const EDGE_SPEEDS_FILE: &str = "edge_speeds.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SAFETY_FILE: &str = "safety.csv";

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

pub fn trips_csv(output: &SimulationOutput) -> String {
    let mut s = String::from("id,class,origin,destination,depart,insert,arrival,travel_time,distance,finished\n");
    for t in &output.trips {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            t.id,
            t.class,
            t.origin,
            t.destination,
            t.depart,
            opt(t.insert),
            opt(t.arrival),
            opt(t.travel_time()),
            t.distance,
            t.finished()
        )
        .unwrap();
    }
    s
}

pub fn edge_speeds_csv(network: &Network, output: &SimulationOutput) -> String {
    let mut s = String::from("edge,from_x,from_y,to_x,to_y,mean_speed,samples\n");
    for (slot, &id) in output.edge_ids.iter().enumerate() {
        let edge = network.edge(id).expect("output edges come from the network");
        let (a, b) = (network.node(edge.from).unwrap(), network.node(edge.to).unwrap());
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            id,
            a.x,
            a.y,
            b.x,
            b.y,
            opt(output.edge_speeds.mean(slot)),
            output.edge_speeds.samples(slot)
        )
        .unwrap();
    }
    s
}

const SUMMARY_HEADER: &str = "mean_travel_time,fuel,co2,ttc_count,pet_count,finished,unfinished\n";

fn summary_line(r: &SummaryRow) -> String {
    format!(
        "{},{},{},{},{},{},{}\n",
        opt(r.mean_travel_time),
        r.fuel,
        r.co2,
        r.ttc_count,
        r.pet_count,
        r.finished,
        r.unfinished
    )
}

pub fn summary_csv(row: &SummaryRow) -> String {
    format!("{SUMMARY_HEADER}{}", summary_line(row))
}

pub fn safety_csv(output: &SimulationOutput) -> String {
    let mut s = String::from("time,kind,vehicle,class,other,edge,value\n");
    for e in &output.safety_log {
        let kind = match e.kind {
            SafetyKind::Ttc => "TTC",
            SafetyKind::Pet => "PET",
        };
        writeln!(s, "{},{},{},{},{},{},{}", e.time, kind, e.vehicle, e.class, e.other, e.edge, e.value).unwrap();
    }
    s
}

/// Writes trips, edge speeds, summary and safety files into `dir`.
pub fn write_run(dir: &Path, network: &Network, output: &SimulationOutput) -> io::Result<SummaryRow> {
    fs::create_dir_all(dir)?;
    let row = summarize(output);
    fs::write(dir.join(TRIPS_FILE), trips_csv(output))?;
    fs::write(dir.join(EDGE_SPEEDS_FILE), edge_speeds_csv(network, output))?;
    fs::write(dir.join(SUMMARY_FILE), summary_csv(&row))?;
    fs::write(dir.join(SAFETY_FILE), safety_csv(output))?;
    Ok(row)
}

/// The four comparison cases, in table order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseTable {
    pub org: SummaryRow,
    pub nrc: SummaryRow,
    pub org_cav: SummaryRow,
    pub nrc_cav: SummaryRow,
}

impl CaseTable {
    pub const LABELS: [&'static str; 4] = ["ORG", "NRC", "ORG(CAV)", "NRC(CAV)"];
}

/// Baseline row in absolute units, the other three as percentage change
/// against it.
pub fn table_csv(t: &CaseTable) -> String {
    let mut s = String::from("case,mean_travel_time,fuel,co2,ttc_count\n");
    writeln!(s, "ORG,{},{},{},{}", opt(t.org.mean_travel_time), t.org.fuel, t.org.co2, t.org.ttc_count).unwrap();
    for (label, row) in CaseTable::LABELS[1..].iter().zip([&t.nrc, &t.org_cav, &t.nrc_cav]) {
        let p = percent_change(row, &t.org);
        writeln!(
            s,
            "{label},{},{},{},{}",
            display_percent(p.mean_travel_time),
            display_percent(p.fuel),
            display_percent(p.co2),
            display_percent(p.ttc_count)
        )
        .unwrap();
    }
    s
}

/// One sweep row per penetration percentage, in the given order.
pub fn sweep_csv(rows: &[(f64, SummaryRow)]) -> String {
    let mut s = String::from("penetration,mean_travel_time,fuel,co2,ttc_count,unfinished\n");
    for (p, r) in rows {
        writeln!(s, "{},{},{},{},{},{}", p, opt(r.mean_travel_time), r.fuel, r.co2, r.ttc_count, r.unfinished)
            .unwrap();
    }
    s
}

/// A parsed `edge_speeds.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpeedRow {
    pub edge: EdgeId,
    pub from: (f64, f64),
    pub to: (f64, f64),
    pub mean_speed: Option<f64>,
    pub samples: u64,
}

pub fn parse_edge_speeds(text: &str) -> Result<Vec<EdgeSpeedRow>, ReportError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "edge,from_x,from_y,to_x,to_y,mean_speed,samples" => {}
        _ => return Err(ReportError::Parse { line: 1, message: "missing edge_speeds header".into() }),
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| ReportError::Parse { line, message };
        let cols: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cols.len() != 7 {
            return Err(err(format!("expected 7 columns, found {}", cols.len())));
        }
        let num = |i: usize| cols[i].parse::<f64>().map_err(|_| err(format!("bad number `{}`", cols[i])));
        let mean_speed = match cols[5] {
            NA => None,
            _ => Some(num(5)?),
        };
        let row = EdgeSpeedRow {
            edge: cols[0].parse().map_err(|_| err(format!("bad edge id `{}`", cols[0])))?,
            from: (num(1)?, num(2)?),
            to: (num(3)?, num(4)?),
            mean_speed,
            samples: cols[6].parse().map_err(|_| err(format!("bad sample count `{}`", cols[6])))?,
        };
        if (row.samples == 0) != row.mean_speed.is_none() {
            return Err(err("mean speed must be NA exactly when samples is 0".into()));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn heatmap_csv(rows: &[EdgeSpeedRow]) -> String {
    let mut s = String::from("edge,mid_x,mid_y,mean_speed\n");
    for r in rows {
        let mid = ((r.from.0 + r.to.0) / 2.0, (r.from.1 + r.to.1) / 2.0);
        writeln!(s, "{},{},{},{}", r.edge, mid.0, mid.1, opt(r.mean_speed)).unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tt: f64, fuel: f64, ttc: u64) -> SummaryRow {
        SummaryRow {
            mean_travel_time: Some(tt),
            fuel,
            co2: fuel * 2.326,
            ttc_count: ttc,
            pet_count: 0,
            finished: 1,
            unfinished: 0,
        }
    }

    #[test]
    fn table_layout() {
        let t = CaseTable { org: row(100.0, 10.0, 4), nrc: row(250.0, 12.0, 6), org_cav: row(90.0, 9.0, 0), nrc_cav: row(100.0, 10.0, 4) };
        let csv = table_csv(&t);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "case,mean_travel_time,fuel,co2,ttc_count");
        assert_eq!(lines[1], "ORG,100,10,23.26,4");
        assert_eq!(lines[2], "NRC,150.00,20.00,20.00,50.00");
        assert_eq!(lines[3], "ORG(CAV),-10.00,-10.00,-10.00,-100.00");
        assert_eq!(lines[4], "NRC(CAV),0.00,0.00,0.00,0.00");
        assert!(!csv.contains('\r'));
    }

    #[test]
    fn zero_baseline_is_na() {
        let t = CaseTable { org: row(100.0, 10.0, 0), nrc: row(100.0, 10.0, 3), org_cav: row(100.0, 10.0, 0), nrc_cav: row(100.0, 10.0, 0) };
        assert!(table_csv(&t).lines().nth(2).unwrap().ends_with(",NA"));
    }

    #[test]
    fn edge_speeds_round_trip_to_heatmap() {
        let text = "edge,from_x,from_y,to_x,to_y,mean_speed,samples\n0,0,0,100,0,12.5,40\n1,100,0,0,0,NA,0\n";
        let rows = parse_edge_speeds(text).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].mean_speed, None);
        assert_eq!(heatmap_csv(&rows), "edge,mid_x,mid_y,mean_speed\n0,50,0,12.5\n1,50,0,NA\n");
    }

    #[test]
    fn malformed_edge_speeds() {
        assert_eq!(parse_edge_speeds("").unwrap_err(), ReportError::Parse { line: 1, message: "missing edge_speeds header".into() });
        let head = "edge,from_x,from_y,to_x,to_y,mean_speed,samples\n";
        for (body, line) in [("0,0,0,1,0,2\n", 2), ("0,0,0,1,0,1,1\nx,0,0,1,0,1,1\n", 3), ("0,0,0,1,0,0.0,0\n", 2)] {
            match parse_edge_speeds(&format!("{head}{body}")) {
                Err(ReportError::Parse { line: l, .. }) => assert_eq!(l, line, "{body:?}"),
                other => panic!("{body:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn sweep_rows_keep_order() {
        let csv = sweep_csv(&[(0.0, row(120.0, 5.0, 1)), (25.0, row(110.0, 5.0, 1))]);
        assert_eq!(csv.lines().nth(1).unwrap(), "0,120,5,11.63,1,0");
        assert!(csv.lines().nth(2).unwrap().starts_with("25,"));
    }
}
