//! Traceroute parsing and AS-path derivation.
//!
//! Raw records arrive one per line as
//! `<timestamp><TAB><src><TAB><dst><TAB><hop>[,<hop>...]` where each hop is
//! `<ttl>:<ip>` and a non-responding hop is `<ttl>:*`. Hop IPs are resolved
//! against the prefix tables and collapsed into an [`AsPath`]: repeated ASes
//! merge, unresolvable hops break adjacency, and a hop inside an IXP prefix
//! bridges the two surrounding ASes.

use std::fmt;
use std::io::BufRead;
use std::net::Ipv4Addr;

use crate::resolution::{AsEntry, Asn, IxpId, IxpIdentity, PrefixTable};

/// One traceroute hop: TTL plus the responding interface, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hop {
    pub ttl: u32,
    pub ip: Option<Ipv4Addr>,
}

/// One measured path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TracerouteRecord {
    pub timestamp: u64,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    hops: Vec<Hop>,
}

impl TracerouteRecord {
    /// Builds a record; hops must be non-empty and sorted by strictly
    /// increasing TTL.
    pub fn new(
        timestamp: u64,
        src: Ipv4Addr,
        dst: Ipv4Addr,
        hops: Vec<Hop>,
    ) -> Result<TracerouteRecord, String> {
        if hops.is_empty() {
            return Err("record has no hops".to_string());
        }
        if hops.iter().any(|h| h.ttl == 0) {
            return Err("hop TTL must be >= 1".to_string());
        }
        if hops.windows(2).any(|w| w[1].ttl <= w[0].ttl) {
            return Err("hop TTLs must be strictly increasing".to_string());
        }
        Ok(TracerouteRecord {
            timestamp,
            src,
            dst,
            hops,
        })
    }

    pub fn hops(&self) -> &[Hop] {
        &self.hops
    }

    fn parse_line(line: &str) -> Result<TracerouteRecord, String> {
        let mut fields = line.split('\t');
        let (ts, src, dst, hops) = match (
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
            fields.next(),
        ) {
            (Some(a), Some(b), Some(c), Some(d), None) => (a, b, c, d),
            _ => return Err("expected 4 tab-separated fields".to_string()),
        };
        let timestamp: u64 = ts.parse().map_err(|_| format!("bad timestamp `{ts}`"))?;
        let src: Ipv4Addr = src.parse().map_err(|_| format!("bad source ip `{src}`"))?;
        let dst: Ipv4Addr = dst.parse().map_err(|_| format!("bad destination ip `{dst}`"))?;
        let hops = hops
            .split(',')
            .map(|h| {
                let (ttl, ip) = h
                    .split_once(':')
                    .ok_or_else(|| format!("bad hop `{h}`"))?;
                let ttl: u32 = ttl.parse().map_err(|_| format!("bad hop ttl `{ttl}`"))?;
                let ip = if ip == "*" {
                    None
                } else {
                    Some(ip.parse().map_err(|_| format!("bad hop ip `{ip}`"))?)
                };
                Ok(Hop { ttl, ip })
            })
            .collect::<Result<Vec<Hop>, String>>()?;
        TracerouteRecord::new(timestamp, src, dst, hops)
    }
}

impl fmt::Display for TracerouteRecord {
    /// Re-serializes in the wire format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t", self.timestamp, self.src, self.dst)?;
        for (i, hop) in self.hops.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match hop.ip {
                Some(ip) => write!(f, "{}:{}", hop.ttl, ip)?,
                None => write!(f, "{}:*", hop.ttl)?,
            }
        }
        Ok(())
    }
}

/// Parse counters accumulated while draining a [`TraceStream`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub parsed: u64,
    pub skipped: u64,
}

/// Streaming parser over a line-oriented traceroute source.
///
/// Lines that fail to parse are counted and skipped rather than aborting the
/// stream; I/O errors are yielded and terminate iteration. Empty and
/// `#`-prefixed lines are ignored silently.
pub struct TraceStream<R> {
    reader: R,
    buf: String,
    summary: IngestSummary,
    done: bool,
}

impl<R: BufRead> TraceStream<R> {
    pub fn new(reader: R) -> TraceStream<R> {
        TraceStream {
            reader,
            buf: String::new(),
            summary: IngestSummary::default(),
            done: false,
        }
    }

    pub fn summary(&self) -> IngestSummary {
        self.summary
    }
}

impl<R: BufRead> Iterator for TraceStream<R> {
    type Item = std::io::Result<TracerouteRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {
                    let line = self.buf.trim_end_matches(['\n', '\r']);
                    if line.trim().is_empty() || line.starts_with('#') {
                        continue;
                    }
                    match TracerouteRecord::parse_line(line) {
                        Ok(rec) => {
                            self.summary.parsed += 1;
                            return Some(Ok(rec));
                        }
                        Err(_) => {
                            self.summary.skipped += 1;
                        }
                    }
                }
            }
        }
        None
    }
}

/// Element of a derived AS path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AsPathElement {
    AsHop(Asn),
    IxpHop(IxpId),
    Break,
}

/// Identifies the traceroute a path came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceKey {
    pub timestamp: u64,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
}

/// The AS-level view of one traceroute.
///
/// Invariants: no two consecutive elements are equal, and every IXP hop sits
/// immediately between two AS hops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AsPath {
    elements: Vec<AsPathElement>,
    source: TraceKey,
}

impl AsPath {
    /// Builds a path, validating the element invariants.
    pub fn new(elements: Vec<AsPathElement>, source: TraceKey) -> Result<AsPath, String> {
        for pair in elements.windows(2) {
            if pair[0] == pair[1] {
                return Err("consecutive duplicate path elements".to_string());
            }
        }
        for (i, e) in elements.iter().enumerate() {
            if matches!(e, AsPathElement::IxpHop(_)) {
                let flanked = i > 0
                    && i + 1 < elements.len()
                    && matches!(elements[i - 1], AsPathElement::AsHop(_))
                    && matches!(elements[i + 1], AsPathElement::AsHop(_));
                if !flanked {
                    return Err("IXP hop not flanked by AS hops".to_string());
                }
            }
        }
        Ok(AsPath { elements, source })
    }

    pub fn elements(&self) -> &[AsPathElement] {
        &self.elements
    }

    pub fn source(&self) -> &TraceKey {
        &self.source
    }
}

/// Addresses that never resolve: RFC1918 space, loopback, 0/8 and multicast.
/// These break adjacency before any table lookup.
fn is_reserved(ip: Ipv4Addr) -> bool {
    let o = ip.octets();
    o[0] == 0
        || o[0] == 10
        || o[0] == 127
        || (o[0] == 172 && (16..=31).contains(&o[1]))
        || (o[0] == 192 && o[1] == 168)
        || (224..=239).contains(&o[0])
}

/// Resolves each hop and collapses the result into an [`AsPath`].
///
/// Per-hop classification, in priority order: IXP prefix match, then AS match
/// to a concrete ASN; everything else (no match, MOAS/AS-set, non-responding
/// hop, reserved address) becomes a break. Runs of equal elements collapse;
/// an IXP hop that is not strictly between two resolved ASes — including a
/// run touching two different IXPs — degrades to a break.
pub fn trace_to_as_path(
    record: &TracerouteRecord,
    as_table: &PrefixTable<AsEntry>,
    ixp_table: &PrefixTable<IxpIdentity>,
) -> AsPath {
    let raw: Vec<AsPathElement> = record
        .hops
        .iter()
        .map(|hop| match hop.ip {
            None => AsPathElement::Break,
            Some(ip) if is_reserved(ip) => AsPathElement::Break,
            Some(ip) => {
                if let Some(ixp) = ixp_table.lookup(ip) {
                    AsPathElement::IxpHop(ixp.id.clone())
                } else {
                    match as_table.lookup(ip) {
                        Some(AsEntry::Asn(asn)) => AsPathElement::AsHop(*asn),
                        Some(AsEntry::Unresolved) | None => AsPathElement::Break,
                    }
                }
            }
        })
        .collect();

    let elements = normalize(raw);
    let source = TraceKey {
        timestamp: record.timestamp,
        src: record.src,
        dst: record.dst,
    };
    debug_assert!(AsPath::new(elements.clone(), source).is_ok());
    AsPath { elements, source }
}

fn collapse(elements: Vec<AsPathElement>) -> Vec<AsPathElement> {
    let mut out: Vec<AsPathElement> = Vec::with_capacity(elements.len());
    for e in elements {
        if out.last() != Some(&e) {
            out.push(e);
        }
    }
    out
}

fn normalize(raw: Vec<AsPathElement>) -> Vec<AsPathElement> {
    let collapsed = collapse(raw);
    // Degrade IXP hops that are not strictly between two AS hops. Neighbour
    // checks look at the collapsed sequence, so a run of two different IXPs
    // degrades entirely.
    let degraded: Vec<AsPathElement> = collapsed
        .iter()
        .enumerate()
        .map(|(i, e)| match e {
            AsPathElement::IxpHop(_) => {
                let prev_as = i > 0 && matches!(collapsed[i - 1], AsPathElement::AsHop(_));
                let next_as = i + 1 < collapsed.len()
                    && matches!(collapsed[i + 1], AsPathElement::AsHop(_));
                if prev_as && next_as {
                    e.clone()
                } else {
                    AsPathElement::Break
                }
            }
            other => other.clone(),
        })
        .collect();
    collapse(degraded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolution::{load_as_prefix_table, load_ixp_prefix_table};
    use proptest::prelude::*;

    fn ip(s: &str) -> Ipv4Addr {
        s.parse().unwrap()
    }

    fn tables() -> (PrefixTable<AsEntry>, PrefixTable<IxpIdentity>) {
        let as_t = load_as_prefix_table(
            "1.0.0.0/8\t1\n2.0.0.0/8\t2\n3.0.0.0/8\t3\n4.0.0.0/8\t7,9\n".as_bytes(),
        )
        .unwrap();
        let ixp_t =
            load_ixp_prefix_table("206.0.0.0/24\tix-x\tExchange X\n207.0.0.0/24\tix-y\tExchange Y\n".as_bytes())
                .unwrap();
        (as_t, ixp_t)
    }

    fn record(hop_ips: &[Option<&str>]) -> TracerouteRecord {
        let hops = hop_ips
            .iter()
            .enumerate()
            .map(|(i, h)| Hop {
                ttl: i as u32 + 1,
                ip: h.map(ip),
            })
            .collect();
        TracerouteRecord::new(1288000000, ip("9.9.9.1"), ip("9.9.9.2"), hops).unwrap()
    }

    fn kinds(path: &AsPath) -> Vec<String> {
        path.elements()
            .iter()
            .map(|e| match e {
                AsPathElement::AsHop(a) => format!("AS{a}"),
                AsPathElement::IxpHop(x) => format!("IXP:{x}"),
                AsPathElement::Break => "BRK".to_string(),
            })
            .collect()
    }

    #[test]
    fn parses_simple_line() {
        let line = "1288000000\t4.4.4.4\t8.8.8.8\t1:1.0.0.1,2:*,3:2.0.0.9";
        let rec = TracerouteRecord::parse_line(line).unwrap();
        assert_eq!(rec.hops().len(), 3);
        assert_eq!(rec.hops()[0].ttl, 1);
        assert_eq!(rec.hops()[1].ip, None);
        assert_eq!(rec.hops()[2].ip, Some(ip("2.0.0.9")));
        assert_eq!(rec.to_string(), line);
    }

    #[test]
    fn three_hop_line_has_ttls_1_2_3() {
        let rec =
            TracerouteRecord::parse_line("5\t1.1.1.1\t2.2.2.2\t1:1.0.0.1,2:1.0.0.2,3:2.0.0.1")
                .unwrap();
        let ttls: Vec<u32> = rec.hops().iter().map(|h| h.ttl).collect();
        assert_eq!(ttls, vec![1, 2, 3]);
    }

    #[test]
    fn stream_counts_skips_and_keeps_going() {
        let src = "1\t1.1.1.1\t2.2.2.2\t1:1.0.0.1\nnot a record\n2\t1.1.1.1\t2.2.2.2\t1:2.0.0.1\n";
        let mut stream = TraceStream::new(src.as_bytes());
        let records: Vec<_> = (&mut stream).collect::<std::io::Result<_>>().unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(stream.summary(), IngestSummary { parsed: 2, skipped: 1 });
    }

    #[test]
    fn stream_round_trips_synthetic_corpus() {
        let mut corpus = String::new();
        for i in 0..1000u32 {
            corpus.push_str(&format!(
                "{}\t1.2.3.4\t5.6.7.8\t1:1.0.0.{},2:*,3:2.0.{}.9\n",
                1288000000 + i,
                i % 250 + 1,
                i % 250
            ));
        }
        let mut stream = TraceStream::new(corpus.as_bytes());
        let records: Vec<_> = (&mut stream).collect::<std::io::Result<_>>().unwrap();
        assert_eq!(records.len(), 1000);
        assert_eq!(stream.summary().skipped, 0);
        let rewritten: String = records.iter().map(|r| format!("{r}\n")).collect();
        assert_eq!(corpus, rewritten);
    }

    #[test]
    fn ttls_must_strictly_increase() {
        assert!(TracerouteRecord::parse_line("1\t1.1.1.1\t2.2.2.2\t2:1.0.0.1,2:1.0.0.2").is_err());
        assert!(TracerouteRecord::parse_line("1\t1.1.1.1\t2.2.2.2\t0:1.0.0.1").is_err());
        assert!(TracerouteRecord::parse_line("1\t1.1.1.1\t2.2.2.2\t").is_err());
    }

    #[test]
    fn repeated_as_collapses() {
        let (as_t, ixp_t) = tables();
        let rec = record(&[Some("1.0.0.1"), Some("1.0.0.2"), Some("2.0.0.1")]);
        let path = trace_to_as_path(&rec, &as_t, &ixp_t);
        assert_eq!(kinds(&path), vec!["AS1", "AS2"]);
    }

    #[test]
    fn missing_hop_breaks_adjacency() {
        let (as_t, ixp_t) = tables();
        let rec = record(&[Some("1.0.0.1"), None, Some("2.0.0.1")]);
        let path = trace_to_as_path(&rec, &as_t, &ixp_t);
        assert_eq!(kinds(&path), vec!["AS1", "BRK", "AS2"]);
    }

    #[test]
    fn ixp_hop_bridges_two_ases() {
        let (as_t, ixp_t) = tables();
        let rec = record(&[Some("1.0.0.1"), Some("206.0.0.5"), Some("2.0.0.1")]);
        let path = trace_to_as_path(&rec, &as_t, &ixp_t);
        assert_eq!(kinds(&path), vec!["AS1", "IXP:ix-x", "AS2"]);
    }

    #[test]
    fn unresolved_and_unknown_hops_break() {
        let (as_t, ixp_t) = tables();
        // 4.0.0.0/8 is MOAS, 99.* is uncovered.
        let rec = record(&[Some("1.0.0.1"), Some("4.0.0.1"), Some("99.0.0.1"), Some("2.0.0.1")]);
        let path = trace_to_as_path(&rec, &as_t, &ixp_t);
        assert_eq!(kinds(&path), vec!["AS1", "BRK", "AS2"]);
    }

    #[test]
    fn reserved_ranges_break_before_lookup() {
        let (_, ixp_t) = tables();
        // A table that would happily cover the private ranges.
        let as_t = load_as_prefix_table("0.0.0.0/0\t77\n".as_bytes()).unwrap();
        for bad in ["10.0.0.1", "172.16.0.1", "172.31.255.1", "192.168.1.1", "127.0.0.1", "0.0.0.3", "224.0.0.5", "239.1.2.3"] {
            let rec = record(&[Some("1.0.0.1"), Some(bad), Some("1.0.0.2")]);
            let path = trace_to_as_path(&rec, &as_t, &ixp_t);
            // 1.0.0.0/8 also resolves via the default route to AS77 here.
            assert_eq!(kinds(&path), vec!["AS77", "BRK", "AS77"], "hop {bad}");
        }
        // Nearby public space still resolves.
        let rec = record(&[Some("172.15.0.1")]);
        assert_eq!(kinds(&trace_to_as_path(&rec, &as_t, &ixp_t)), vec!["AS77"]);
        let rec = record(&[Some("172.32.0.1")]);
        assert_eq!(kinds(&trace_to_as_path(&rec, &as_t, &ixp_t)), vec!["AS77"]);
    }

    #[test]
    fn ixp_adjacent_to_break_degrades() {
        let (as_t, ixp_t) = tables();
        let rec = record(&[Some("1.0.0.1"), Some("206.0.0.5"), None, Some("2.0.0.1")]);
        let path = trace_to_as_path(&rec, &as_t, &ixp_t);
        assert_eq!(kinds(&path), vec!["AS1", "BRK", "AS2"]);
        // Leading and trailing IXP hops also degrade.
        let rec = record(&[Some("206.0.0.5"), Some("1.0.0.1")]);
        assert_eq!(kinds(&trace_to_as_path(&rec, &as_t, &ixp_t)), vec!["BRK", "AS1"]);
        let rec = record(&[Some("1.0.0.1"), Some("206.0.0.5")]);
        assert_eq!(kinds(&trace_to_as_path(&rec, &as_t, &ixp_t)), vec!["AS1", "BRK"]);
    }

    #[test]
    fn two_different_ixps_in_a_row_degrade() {
        let (as_t, ixp_t) = tables();
        let rec = record(&[Some("1.0.0.1"), Some("206.0.0.5"), Some("207.0.0.5"), Some("2.0.0.1")]);
        let path = trace_to_as_path(&rec, &as_t, &ixp_t);
        assert_eq!(kinds(&path), vec!["AS1", "BRK", "AS2"]);
    }

    #[test]
    fn same_ixp_run_collapses_then_bridges() {
        let (as_t, ixp_t) = tables();
        let rec = record(&[Some("1.0.0.1"), Some("206.0.0.5"), Some("206.0.0.6"), Some("2.0.0.1")]);
        let path = trace_to_as_path(&rec, &as_t, &ixp_t);
        assert_eq!(kinds(&path), vec!["AS1", "IXP:ix-x", "AS2"]);
    }

    #[test]
    fn single_as_trace_is_single_hop() {
        let (as_t, ixp_t) = tables();
        let rec = record(&[Some("1.0.0.1"), Some("1.0.0.2"), Some("1.0.0.3")]);
        let path = trace_to_as_path(&rec, &as_t, &ixp_t);
        assert_eq!(kinds(&path), vec!["AS1"]);
    }

    #[test]
    fn as_path_new_rejects_invalid_sequences() {
        let key = TraceKey {
            timestamp: 0,
            src: ip("1.1.1.1"),
            dst: ip("2.2.2.2"),
        };
        let a1 = AsPathElement::AsHop(Asn::new(1).unwrap());
        let brk = AsPathElement::Break;
        let ixp = AsPathElement::IxpHop(IxpId::new("ix").unwrap());
        assert!(AsPath::new(vec![a1.clone(), a1.clone()], key).is_err());
        assert!(AsPath::new(vec![brk.clone(), brk.clone()], key).is_err());
        assert!(AsPath::new(vec![a1.clone(), ixp.clone()], key).is_err());
        assert!(AsPath::new(vec![ixp.clone()], key).is_err());
        assert!(AsPath::new(
            vec![a1.clone(), ixp, AsPathElement::AsHop(Asn::new(2).unwrap())],
            key
        )
        .is_ok());
        assert!(AsPath::new(vec![], key).is_ok());
    }

    /// Strategy producing arbitrary hop lists over a small universe so that
    /// collisions and runs are common.
    fn hop_strategy() -> impl Strategy<Value = Vec<Option<&'static str>>> {
        let hop = prop_oneof![
            Just(None),
            Just(Some("1.0.0.1")),
            Just(Some("1.0.0.200")),
            Just(Some("2.0.0.1")),
            Just(Some("3.0.0.1")),
            Just(Some("4.0.0.1")),   // MOAS
            Just(Some("99.0.0.1")),  // uncovered
            Just(Some("10.1.1.1")),  // reserved
            Just(Some("206.0.0.5")), // IXP x
            Just(Some("207.0.0.5")), // IXP y
        ];
        proptest::collection::vec(hop, 1..20)
    }

    proptest! {
        #[test]
        fn derived_paths_satisfy_invariants(hops in hop_strategy()) {
            let (as_t, ixp_t) = tables();
            let rec = record(&hops);
            let path = trace_to_as_path(&rec, &as_t, &ixp_t);
            // Re-validating through the checked constructor covers every
            // invariant: no consecutive duplicates, IXPs flanked by ASes.
            prop_assert!(AsPath::new(path.elements().to_vec(), *path.source()).is_ok());
        }

        /// Dropping a duplicated consecutive same-AS hop never changes the
        /// derived path.
        #[test]
        fn collapse_is_idempotent_under_hop_duplication(hops in hop_strategy(), dup in 0usize..20) {
            let (as_t, ixp_t) = tables();
            let mut doubled = hops.clone();
            let at = dup % hops.len();
            doubled.insert(at, hops[at]);
            let base = trace_to_as_path(&record(&hops), &as_t, &ixp_t);
            let with_dup = trace_to_as_path(&record(&doubled), &as_t, &ixp_t);
            prop_assert_eq!(base.elements(), with_dup.elements());
        }
    }
}
