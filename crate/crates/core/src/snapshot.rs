//! Line-oriented text snapshots of a view.
//!
//! ```text
//! # gasperlab view snapshot v1
//! config slots_per_epoch=4 validators=1,1,1,1
//! clock none
//! block accepted id=0000000000000000 slot=0 parent=none proposer=none ts=0 attests= payload=
//! attestation buffered id=... author=2 slot=5 block=... source=<hex>:0 target=<hex>:1 ts=5.5
//! ```
//!
//! Accepted messages come first in acceptance order, then buffered ones, then
//! ones held back by the clock. Importing re-delivers every line in order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::types::*;
use crate::view::View;

pub const HEADER: &str = "# gasperlab view snapshot v1";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).ok()).collect()
}

fn write_message(out: &mut String, status: &str, m: &Message) {
    match m {
        Message::Block(b) => {
            let parent = b.parent.map_or("none".to_string(), |p| p.to_string());
            let proposer = b.proposer.map_or("none".to_string(), |p| p.0.to_string());
            let atts: Vec<String> = b.newattests.iter().map(|a| format!("{:016x}", a.0)).collect();
            let _ = writeln!(
                out,
                "block {status} id={} slot={} parent={parent} proposer={proposer} ts={} attests={} payload={}",
                b.id,
                b.slot,
                b.timestamp,
                atts.join(","),
                hex(&b.payload)
            );
        }
        Message::Attestation(a) => {
            let _ = writeln!(
                out,
                "attestation {status} id={:016x} author={} slot={} block={} source={} target={} ts={}",
                a.id.0, a.author.0, a.slot, a.block, a.source, a.target, a.timestamp
            );
        }
    }
}

pub fn export(view: &View) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let stakes: Vec<String> = view.validators().stakes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "config slots_per_epoch={} validators={}", view.slots_per_epoch(), stakes.join(","));
    match view.clock() {
        Some(t) => {
            let _ = writeln!(out, "clock {t}");
        }
        None => out.push_str("clock none\n"),
    }
    for id in view.acceptance_order() {
        write_message(&mut out, "accepted", &view.message(*id).expect("accepted message"));
    }
    for m in view.raw_buffered() {
        write_message(&mut out, "buffered", m);
    }
    for m in view.raw_future() {
        write_message(&mut out, "future", m);
    }
    out
}

struct Line<'a> {
    no: usize,
    fields: BTreeMap<&'a str, &'a str>,
}

impl<'a> Line<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Snapshot { line: self.no, reason: reason.into() }
    }

    fn get(&self, k: &str) -> Result<&'a str> {
        self.fields.get(k).copied().ok_or_else(|| self.err(format!("missing field `{k}`")))
    }

    fn num<T: std::str::FromStr>(&self, k: &str) -> Result<T> {
        self.get(k)?.parse().map_err(|_| self.err(format!("bad value for `{k}`")))
    }

    fn id(&self, k: &str) -> Result<u64> {
        let s = self.get(k)?;
        u64::from_str_radix(s, 16).map_err(|_| self.err(format!("bad id for `{k}`")))
    }

    fn pair(&self, k: &str) -> Result<CheckpointPair> {
        let s = self.get(k)?;
        let (b, e) = s.split_once(':').ok_or_else(|| self.err(format!("`{k}` must be block:epoch")))?;
        let block = u64::from_str_radix(b, 16).map_err(|_| self.err(format!("bad block in `{k}`")))?;
        let epoch = e.parse().map_err(|_| self.err(format!("bad epoch in `{k}`")))?;
        Ok(CheckpointPair::new(BlockId(block), epoch))
    }

    fn opt(&self, k: &str) -> Result<Option<&'a str>> {
        let s = self.get(k)?;
        Ok(if s == "none" { None } else { Some(s) })
    }
}

fn parse_fields(no: usize, rest: &str) -> Result<Line<'_>> {
    let mut fields = BTreeMap::new();
    for tok in rest.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Snapshot { line: no, reason: format!("expected key=value, got `{tok}`") })?;
        fields.insert(k, v);
    }
    Ok(Line { no, fields })
}

fn parse_message(line: &Line<'_>, kind: &str) -> Result<Message> {
    match kind {
        "block" => {
            let parent = line.opt("parent")?.map(|p| u64::from_str_radix(p, 16).map(BlockId)).transpose();
            let parent = parent.map_err(|_| line.err("bad parent"))?;
            let proposer = line.opt("proposer")?.map(|p| p.parse().map(ValidatorId)).transpose();
            let proposer = proposer.map_err(|_| line.err("bad proposer"))?;
            let attests = line.get("attests")?;
            let newattests = if attests.is_empty() {
                Vec::new()
            } else {
                attests
                    .split(',')
                    .map(|a| u64::from_str_radix(a, 16).map(AttestationId))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| line.err("bad attests"))?
            };
            let payload = unhex(line.get("payload")?).ok_or_else(|| line.err("bad payload"))?;
            Ok(Message::Block(Block {
                id: BlockId(line.id("id")?),
                slot: line.num("slot")?,
                parent,
                proposer,
                newattests,
                payload,
                timestamp: line.num("ts")?,
            }))
        }
        "attestation" => Ok(Message::Attestation(Attestation {
            id: AttestationId(line.id("id")?),
            author: ValidatorId(line.num("author")?),
            slot: line.num("slot")?,
            block: BlockId(line.id("block")?),
            source: line.pair("source")?,
            target: line.pair("target")?,
            timestamp: line.num("ts")?,
        })),
        other => Err(line.err(format!("unknown record kind `{other}`"))),
    }
}

pub fn import(text: &str) -> Result<View> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let bad = |line: usize, r: &str| Error::Snapshot { line, reason: r.to_string() };
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        Some((n, _)) => return Err(bad(n, "missing snapshot header")),
        None => return Err(bad(0, "empty snapshot")),
    }
    let (n, cfg) = lines.next().ok_or_else(|| bad(2, "missing config line"))?;
    let cfg = cfg.strip_prefix("config ").ok_or_else(|| bad(n, "expected config line"))?;
    let cfg = parse_fields(n, cfg)?;
    let c: u64 = cfg.num("slots_per_epoch")?;
    if c == 0 {
        return Err(bad(n, "slots_per_epoch must be positive"));
    }
    let stakes = cfg
        .get("validators")?
        .split(',')
        .map(str::parse)
        .collect::<std::result::Result<Vec<Stake>, _>>()
        .map_err(|_| bad(n, "bad validators list"))?;
    let vs = ValidatorSet::new(stakes).map_err(|e| bad(n, &e.to_string()))?;
    let mut view = View::empty(c, Arc::new(vs));

    let (n, clock) = lines.next().ok_or_else(|| bad(3, "missing clock line"))?;
    let clock = clock.strip_prefix("clock ").ok_or_else(|| bad(n, "expected clock line"))?;
    if clock != "none" {
        let t: f64 = clock.parse().map_err(|_| bad(n, "bad clock"))?;
        view = view.with_clock(t);
    }

    for (n, l) in lines {
        if l.starts_with('#') {
            continue;
        }
        let mut parts = l.splitn(3, ' ');
        let kind = parts.next().unwrap_or_default();
        let status = parts.next().unwrap_or_default();
        if !matches!(status, "accepted" | "buffered" | "future") {
            return Err(bad(n, "status must be accepted, buffered or future"));
        }
        let fields = parse_fields(n, parts.next().unwrap_or_default())?;
        let msg = parse_message(&fields, kind)?;
        view.deliver(msg).map_err(|e| bad(n, &e.to_string()))?;
    }
    Ok(view)
}
