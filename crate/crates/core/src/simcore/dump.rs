//! Line-delimited trace files.
//!
//! ```text
//! # seed=7
//! # scenario_digest=<sha256 hex>
//! # nf_top_level=2
//! # nf_levels=0@0;1@4000000
//! packet_id,flow_id,kind,size,ttl,t_sent,t_nf_in,t_nf_out,t_recv,thread_id,dropped_at
//! 0,1,UDP,64,64,0,6051,11029,19080,0,
//! icmp,orig_packet_id,router_hop,t_reply_arrival
//! icmp,0,6,123456
//! ```
//!
//! Absent values are empty fields; all times are integer nanoseconds.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{IcmpReplyRecord, PacketRecord, Trace};
use crate::error::{Error, Result};
use crate::nfmodels::LevelChange;
use crate::probegen::PacketKind;
use crate::time::SimTime;

pub const PACKET_HEADER: &str =
    "packet_id,flow_id,kind,size,ttl,t_sent,t_nf_in,t_nf_out,t_recv,thread_id,dropped_at";
pub const ICMP_HEADER: &str = "icmp,orig_packet_id,router_hop,t_reply_arrival";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace(trace: &Trace) -> String {
    let mut out = String::new();
    let levels: Vec<String> = trace.nf_levels.iter().map(|c| format!("{}@{}", c.level, c.at.0)).collect();
    writeln!(out, "# seed={}", trace.seed).unwrap();
    writeln!(out, "# scenario_digest={}", trace.scenario_digest).unwrap();
    writeln!(out, "# nf_top_level={}", trace.nf_top_level).unwrap();
    writeln!(out, "# nf_levels={}", levels.join(";")).unwrap();
    writeln!(out, "{PACKET_HEADER}").unwrap();
    for p in &trace.packets {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.packet_id,
            p.flow_id,
            p.kind,
            p.size_bytes,
            p.ttl,
            p.t_sent.0,
            opt(p.t_nf_in.map(|t| t.0)),
            opt(p.t_nf_out.map(|t| t.0)),
            opt(p.t_recv.map(|t| t.0)),
            opt(p.thread_id),
            p.dropped_at.as_deref().unwrap_or(""),
        )
        .unwrap();
    }
    writeln!(out, "{ICMP_HEADER}").unwrap();
    for r in &trace.icmp_replies {
        writeln!(out, "icmp,{},{},{}", r.orig_packet_id, r.router_hop, r.t_reply_arrival.0).unwrap();
    }
    out
}

fn field<T: FromStr>(s: &str, line: usize, name: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad {name} `{s}`")))
}

fn opt_field<T: FromStr>(s: &str, line: usize, name: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        field(s, line, name).map(Some)
    }
}

pub fn read_trace(text: &str) -> Result<Trace> {
    let mut trace = Trace {
        packets: Vec::new(),
        icmp_replies: Vec::new(),
        scenario_digest: String::new(),
        seed: 0,
        nf_levels: Vec::new(),
        nf_top_level: 0,
    };
    for (i, raw) in text.lines().enumerate() {
        let ln = i + 1;
        let line = raw.trim();
        if line.is_empty() || line == PACKET_HEADER || line == ICMP_HEADER {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            let Some((k, v)) = meta.trim().split_once('=') else { continue };
            match k.trim() {
                "seed" => trace.seed = field(v.trim(), ln, "seed")?,
                "scenario_digest" => trace.scenario_digest = v.trim().to_string(),
                "nf_top_level" => trace.nf_top_level = field(v.trim(), ln, "nf_top_level")?,
                "nf_levels" => {
                    for item in v.trim().split(';').filter(|s| !s.is_empty()) {
                        let (l, at) = item
                            .split_once('@')
                            .ok_or_else(|| Error::Parse(format!("line {ln}: bad level change `{item}`")))?;
                        trace.nf_levels.push(LevelChange {
                            at: SimTime(field(at, ln, "level time")?),
                            level: field(l, ln, "level")?,
                        });
                    }
                }
                _ => {}
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols[0] == "icmp" {
            if cols.len() != 4 {
                return Err(Error::Parse(format!("line {ln}: icmp record needs 4 fields")));
            }
            trace.icmp_replies.push(IcmpReplyRecord {
                orig_packet_id: field(cols[1], ln, "orig_packet_id")?,
                router_hop: field(cols[2], ln, "router_hop")?,
                t_reply_arrival: SimTime(field(cols[3], ln, "t_reply_arrival")?),
            });
            continue;
        }
        if cols.len() != 11 {
            return Err(Error::Parse(format!("line {ln}: packet record needs 11 fields, got {}", cols.len())));
        }
        trace.packets.push(PacketRecord {
            packet_id: field(cols[0], ln, "packet_id")?,
            flow_id: field(cols[1], ln, "flow_id")?,
            kind: field::<PacketKind>(cols[2], ln, "kind")?,
            size_bytes: field(cols[3], ln, "size")?,
            ttl: field(cols[4], ln, "ttl")?,
            t_sent: SimTime(field(cols[5], ln, "t_sent")?),
            t_nf_in: opt_field(cols[6], ln, "t_nf_in")?.map(SimTime),
            t_nf_out: opt_field(cols[7], ln, "t_nf_out")?.map(SimTime),
            t_recv: opt_field(cols[8], ln, "t_recv")?.map(SimTime),
            thread_id: opt_field(cols[9], ln, "thread_id")?,
            dropped_at: (!cols[10].is_empty()).then(|| cols[10].to_string()),
        });
    }
    trace.packets.sort_by_key(|p| p.packet_id);
    Ok(trace)
}
