//! Packet records, flow keys, and observation windowing.
//!
//! A trace is a totally ordered stream of [`PacketRecord`]s. It is cut into
//! observations of exactly `m` consecutive packets; every observation is then
//! summarized as a [`FlowHistogram`] over `(source, destination, port)`
//! triples.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::hash::Hash;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Opaque node identifier. Dotted quads, host names and simulator labels are
/// all just strings here.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(Arc<str>);

impl NodeId {
    pub fn new(id: impl AsRef<str>) -> Self {
        NodeId(Arc::from(id.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId::new(s)
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(Arc::from(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
    Other,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
            Protocol::Other => "other",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tcp" => Ok(Protocol::Tcp),
            "udp" => Ok(Protocol::Udp),
            "icmp" => Ok(Protocol::Icmp),
            "other" => Ok(Protocol::Other),
            _ => Err(format!("unknown protocol {s:?}")),
        }
    }
}

/// One observed packet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PacketRecord {
    pub seq: u64,
    pub src: NodeId,
    pub dst: NodeId,
    pub dport: u16,
    pub proto: Protocol,
    pub size: u64,
}

impl PacketRecord {
    pub fn flow_key(&self) -> FlowKey {
        FlowKey {
            src: self.src.clone(),
            dst: self.dst.clone(),
            dport: self.dport,
        }
    }
}

/// The `(source, destination, destination port)` triple traffic is counted
/// over. Ordering is lexicographic on the three fields.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlowKey {
    pub src: NodeId,
    pub dst: NodeId,
    pub dport: u16,
}

impl FlowKey {
    pub fn new(src: impl Into<NodeId>, dst: impl Into<NodeId>, dport: u16) -> Self {
        FlowKey {
            src: src.into(),
            dst: dst.into(),
            dport,
        }
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}:{}", self.src, self.dst, self.dport)
    }
}

/// Anything that can be used as a flow key by the detection and agent layers.
///
/// [`FlowKey`] is the general implementation; the simulator uses a compact
/// integer key with the same ordering semantics.
pub trait Flow: Clone + Ord + Hash + fmt::Debug {
    type Node: Clone + Ord + Hash + fmt::Debug;

    fn destination(&self) -> &Self::Node;
    fn port(&self) -> u16;
}

impl Flow for FlowKey {
    type Node = NodeId;

    fn destination(&self) -> &NodeId {
        &self.dst
    }

    fn port(&self) -> u16 {
        self.dport
    }
}

/// A block of `m` consecutive packets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub index: usize,
    pub packets: Vec<PacketRecord>,
}

/// Bounded FIFO holding the most recent `capacity` items.
#[derive(Clone, Debug)]
pub struct SlidingWindow<T> {
    capacity: usize,
    contents: VecDeque<T>,
}

impl<T> SlidingWindow<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::param("sliding window capacity must be at least 1"));
        }
        Ok(SlidingWindow {
            capacity,
            contents: VecDeque::with_capacity(capacity),
        })
    }

    /// Appends `item`, returning the evicted oldest entry when full.
    pub fn push(&mut self, item: T) -> Option<T> {
        let evicted = if self.contents.len() == self.capacity {
            self.contents.pop_front()
        } else {
            None
        };
        self.contents.push_back(item);
        evicted
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.contents.len() == self.capacity
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &T> + ExactSizeIterator {
        self.contents.iter()
    }

    pub fn clear(&mut self) {
        self.contents.clear();
    }
}

impl<T: Clone> SlidingWindow<T> {
    pub fn to_vec(&self) -> Vec<T> {
        self.contents.iter().cloned().collect()
    }
}

/// Supported trace encodings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TraceFormat {
    /// `src,dst,dport,proto,size` lines, `#` comments.
    #[default]
    V1,
}

pub const TRACE_HEADER_V1: &str = "#immunet-trace v1";

/// What to do with a malformed line.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OnMalformed {
    #[default]
    Abort,
    SkipAndCount,
}

#[derive(Clone, Debug, Default)]
pub struct ParsedTrace {
    pub records: Vec<PacketRecord>,
    /// `(line number, message)` for every skipped line.
    pub skipped: Vec<(usize, String)>,
}

/// Reads a line-record trace. Records get `seq` in file order starting at 0.
pub fn parse_trace<R: BufRead>(
    input: R,
    format: TraceFormat,
    on_malformed: OnMalformed,
) -> Result<ParsedTrace> {
    let TraceFormat::V1 = format;
    let mut out = ParsedTrace::default();
    let mut seq = 0u64;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some(rest) = text.strip_prefix("#immunet-trace") {
            let version = rest.trim();
            if version != "v1" {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unsupported trace version {version:?}"),
                });
            }
            continue;
        }
        if text.starts_with('#') {
            continue;
        }
        match parse_v1_line(text, seq) {
            Ok(rec) => {
                out.records.push(rec);
                seq += 1;
            }
            Err(message) => match on_malformed {
                OnMalformed::Abort => return Err(Error::Parse { line: lineno, message }),
                OnMalformed::SkipAndCount => out.skipped.push((lineno, message)),
            },
        }
    }
    Ok(out)
}

fn parse_v1_line(text: &str, seq: u64) -> std::result::Result<PacketRecord, String> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    if fields[0].is_empty() || fields[1].is_empty() {
        return Err("empty node identifier".into());
    }
    let port: u64 = fields[2]
        .parse()
        .map_err(|_| format!("bad port {:?}", fields[2]))?;
    let dport = u16::try_from(port).map_err(|_| "port out of range".to_string())?;
    let proto = fields[3].parse::<Protocol>()?;
    let size = fields[4]
        .parse::<u64>()
        .map_err(|_| format!("bad size {:?}", fields[4]))?;
    Ok(PacketRecord {
        seq,
        src: NodeId::new(fields[0]),
        dst: NodeId::new(fields[1]),
        dport,
        proto,
        size,
    })
}

/// Writes records in the v1 format, header included.
pub fn write_trace<W: Write>(records: &[PacketRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER_V1}")?;
    for r in records {
        writeln!(out, "{},{},{},{},{}", r.src, r.dst, r.dport, r.proto, r.size)?;
    }
    Ok(())
}

/// Cuts records into observations of exactly `m` packets; the trailing
/// remainder is discarded.
pub fn window_packets(records: &[PacketRecord], m: usize) -> Result<Vec<Observation>> {
    if m == 0 {
        return Err(Error::param("packets per observation must be at least 1"));
    }
    Ok(records
        .chunks_exact(m)
        .enumerate()
        .map(|(index, chunk)| Observation {
            index,
            packets: chunk.to_vec(),
        })
        .collect())
}

/// Packet counts per flow for one observation, sorted by key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowHistogram<K = FlowKey> {
    entries: Vec<(K, u64)>,
    total: u64,
}

impl<K: Ord> FlowHistogram<K> {
    /// Builds a histogram from arbitrary `(key, count)` pairs; duplicate keys
    /// are merged and zero counts dropped.
    pub fn from_counts<I: IntoIterator<Item = (K, u64)>>(counts: I) -> Self {
        let mut merged: BTreeMap<K, u64> = BTreeMap::new();
        for (k, c) in counts {
            if c > 0 {
                *merged.entry(k).or_insert(0) += c;
            }
        }
        Self::from_sorted(merged.into_iter().collect())
    }

    /// `entries` must be strictly increasing by key with non-zero counts.
    pub(crate) fn from_sorted(entries: Vec<(K, u64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|(_, c)| *c > 0));
        let total = entries.iter().map(|(_, c)| *c).sum();
        FlowHistogram { entries, total }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct flows.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&K, u64)> {
        self.entries.iter().map(|(k, c)| (k, *c))
    }

    pub fn get(&self, key: &K) -> u64 {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(key))
            .map(|i| self.entries[i].1)
            .unwrap_or(0)
    }

    pub fn contains(&self, key: &K) -> bool {
        self.get(key) > 0
    }

    pub fn counts(&self) -> impl ExactSizeIterator<Item = u64> + '_ {
        self.entries.iter().map(|(_, c)| *c)
    }
}

/// Counts packets per flow triple in one observation.
pub fn flow_histogram(obs: &Observation) -> Result<FlowHistogram> {
    if obs.packets.is_empty() {
        return Err(Error::input(format!("observation {} is empty", obs.index)));
    }
    Ok(FlowHistogram::from_counts(
        obs.packets.iter().map(|p| (p.flow_key(), 1)),
    ))
}
