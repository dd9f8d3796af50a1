//! IP prefix datasets and longest-prefix-match resolution.
//!
//! Three table kinds share one structure: prefix-to-AS (with MOAS/AS-set
//! entries collapsed to [`AsEntry::Unresolved`]), prefix-to-IXP and
//! prefix-to-country. Tables are immutable after load; lookups are read-only
//! and may run from any number of threads.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;
use std::net::Ipv4Addr;

use thiserror::Error;

/// A valid autonomous system number (strictly positive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Asn(u32);

impl Asn {
    pub fn new(value: u32) -> Option<Asn> {
        if value == 0 {
            None
        } else {
            Some(Asn(value))
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Payload of an AS prefix table entry.
///
/// Prefixes originated by multiple ASes (MOAS) or by AS sets carry the
/// `Unresolved` sentinel: they never resolve to a concrete AS number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AsEntry {
    Asn(Asn),
    Unresolved,
}

/// Two-letter uppercase ISO 3166-1 country code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 2]);

impl CountryCode {
    pub fn parse(s: &str) -> Option<CountryCode> {
        let b = s.as_bytes();
        if b.len() == 2 && b.iter().all(|c| c.is_ascii_uppercase()) {
            Some(CountryCode([b[0], b[1]]))
        } else {
            None
        }
    }

    pub fn as_str(&self) -> &str {
        std::str::from_utf8(&self.0).expect("country code is ASCII")
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Opaque exchange-point identifier token.
///
/// Two prefixes of the same exchange carry the same id; equality of ids is
/// equality of exchanges. The token is ASCII with no whitespace or commas so
/// it survives the snapshot dump format unescaped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IxpId(String);

impl IxpId {
    pub fn new(token: &str) -> Option<IxpId> {
        if token.is_empty()
            || !token.is_ascii()
            || token.bytes().any(|b| b.is_ascii_whitespace() || b == b',')
        {
            None
        } else {
            Some(IxpId(token.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IxpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An Internet exchange point: identifier plus display name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IxpIdentity {
    pub id: IxpId,
    pub name: String,
}

/// A canonical IPv4 CIDR prefix: all host bits of the base address are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    base: u32,
    len: u8,
}

impl Prefix {
    /// Builds a prefix, masking the base down to canonical form.
    pub fn new(base: Ipv4Addr, len: u8) -> Result<Prefix, TableError> {
        if len > 32 {
            return Err(TableError::BadPrefixLength(len));
        }
        let raw = u32::from(base);
        Ok(Prefix {
            base: raw & Self::mask(len),
            len,
        })
    }

    /// Parses dotted-quad CIDR notation, e.g. `10.0.0.0/8`.
    pub fn from_cidr(s: &str) -> Option<Prefix> {
        let (addr, len) = s.split_once('/')?;
        let addr: Ipv4Addr = addr.parse().ok()?;
        let len: u8 = len.parse().ok()?;
        Prefix::new(addr, len).ok()
    }

    pub fn base(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.base)
    }

    pub fn prefix_len(&self) -> u8 {
        self.len
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        (u32::from(ip) & Self::mask(self.len)) == self.base
    }

    /// Number of addresses covered: 2^(32 - len).
    pub fn address_count(&self) -> u64 {
        1u64 << (32 - self.len)
    }

    fn mask(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - len)
        }
    }

    fn bit(&self, depth: u8) -> usize {
        ((self.base >> (31 - depth)) & 1) as usize
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base(), self.len)
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("i/o error reading table: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("prefix length {0} out of range (max 32)")]
    BadPrefixLength(u8),
}

fn parse_err(line: usize, reason: impl Into<String>) -> TableError {
    TableError::Parse {
        line,
        reason: reason.into(),
    }
}

const NO_NODE: u32 = u32::MAX;
const NO_VALUE: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct TrieNode {
    child: [u32; 2],
    value: u32,
}

/// Binary trie over address bits; each node may carry an entry index.
struct Trie {
    nodes: Vec<TrieNode>,
}

impl Trie {
    fn build(prefixes: impl Iterator<Item = Prefix>) -> Trie {
        let mut nodes = vec![TrieNode {
            child: [NO_NODE; 2],
            value: NO_VALUE,
        }];
        for (idx, prefix) in prefixes.enumerate() {
            let mut at = 0usize;
            for depth in 0..prefix.len {
                let bit = prefix.bit(depth);
                let next = nodes[at].child[bit];
                at = if next == NO_NODE {
                    nodes.push(TrieNode {
                        child: [NO_NODE; 2],
                        value: NO_VALUE,
                    });
                    let new = (nodes.len() - 1) as u32;
                    nodes[at].child[bit] = new;
                    new as usize
                } else {
                    next as usize
                };
            }
            nodes[at].value = idx as u32;
        }
        Trie { nodes }
    }

    /// Index of the longest covering prefix, if any.
    fn lookup(&self, ip: u32) -> Option<u32> {
        let mut best = self.nodes[0].value;
        let mut at = 0usize;
        for depth in 0..32 {
            let bit = ((ip >> (31 - depth)) & 1) as usize;
            let next = self.nodes[at].child[bit];
            if next == NO_NODE {
                break;
            }
            at = next as usize;
            if self.nodes[at].value != NO_VALUE {
                best = self.nodes[at].value;
            }
        }
        (best != NO_VALUE).then_some(best)
    }
}

/// Immutable longest-prefix-match table from IPv4 prefixes to payloads.
///
/// Entries are stored sorted by (base, length); the payload family is fixed
/// by the type parameter (`AsEntry`, `IxpIdentity` or `CountryCode`).
pub struct PrefixTable<V> {
    entries: Vec<(Prefix, V)>,
    trie: Trie,
}

impl<V> fmt::Debug for PrefixTable<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrefixTable")
            .field("entries", &self.entries.len())
            .finish()
    }
}

impl<V> PrefixTable<V> {
    /// Builds a table from (prefix, payload) pairs. Later duplicates of the
    /// same prefix replace earlier ones.
    pub fn from_entries(pairs: impl IntoIterator<Item = (Prefix, V)>) -> PrefixTable<V> {
        let mut map: BTreeMap<Prefix, V> = BTreeMap::new();
        for (p, v) in pairs {
            map.insert(p, v);
        }
        let entries: Vec<(Prefix, V)> = map.into_iter().collect();
        let trie = Trie::build(entries.iter().map(|(p, _)| *p));
        PrefixTable { entries, trie }
    }

    pub fn empty() -> PrefixTable<V> {
        PrefixTable::from_entries(std::iter::empty())
    }

    /// Payload of the longest prefix covering `ip`, or `None`.
    pub fn lookup(&self, ip: Ipv4Addr) -> Option<&V> {
        self.trie
            .lookup(u32::from(ip))
            .map(|idx| &self.entries[idx as usize].1)
    }

    /// Entries in canonical (base, length) order.
    pub fn entries(&self) -> impl Iterator<Item = (&Prefix, &V)> {
        self.entries.iter().map(|(p, v)| (p, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Iterates non-comment lines with their 1-based line numbers, enforcing the
/// ASCII encoding the table formats require.
fn data_lines(
    reader: impl BufRead,
) -> impl Iterator<Item = Result<(usize, String), TableError>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        match line {
            Err(e) => Some(Err(TableError::Io(e))),
            Ok(l) => {
                let l = l.strip_suffix('\r').map(str::to_string).unwrap_or(l);
                if l.trim().is_empty() || l.starts_with('#') {
                    None
                } else if !l.is_ascii() {
                    Some(Err(parse_err(line_no, "non-ASCII input")))
                } else {
                    Some(Ok((line_no, l)))
                }
            }
        }
    })
}

fn parse_cidr_field(line_no: usize, field: &str) -> Result<Prefix, TableError> {
    Prefix::from_cidr(field)
        .ok_or_else(|| parse_err(line_no, format!("malformed CIDR prefix `{field}`")))
}

/// Loads a prefix-to-AS table.
///
/// Line format: `<CIDR><TAB><asn-field>`, where the asn-field is one integer,
/// a comma-separated integer list (MOAS) or the literal `SET` (AS set). MOAS
/// and `SET` entries load as [`AsEntry::Unresolved`]; duplicate prefixes keep
/// the last occurrence.
pub fn load_as_prefix_table(reader: impl BufRead) -> Result<PrefixTable<AsEntry>, TableError> {
    let mut pairs = Vec::new();
    for item in data_lines(reader) {
        let (line_no, line) = item?;
        let mut fields = line.split('\t');
        let (cidr, asn_field) = match (fields.next(), fields.next(), fields.next()) {
            (Some(c), Some(a), None) => (c, a),
            _ => return Err(parse_err(line_no, "expected `<CIDR><TAB><asn-field>`")),
        };
        let prefix = parse_cidr_field(line_no, cidr)?;
        let entry = if asn_field == "SET" {
            AsEntry::Unresolved
        } else if asn_field.contains(',') {
            for part in asn_field.split(',') {
                parse_asn(line_no, part)?;
            }
            AsEntry::Unresolved
        } else {
            AsEntry::Asn(parse_asn(line_no, asn_field)?)
        };
        pairs.push((prefix, entry));
    }
    Ok(PrefixTable::from_entries(pairs))
}

fn parse_asn(line_no: usize, field: &str) -> Result<Asn, TableError> {
    field
        .parse::<u32>()
        .ok()
        .and_then(Asn::new)
        .ok_or_else(|| parse_err(line_no, format!("invalid AS number `{field}`")))
}

/// Loads a prefix-to-IXP table. Line format: `<CIDR><TAB><ixp-id><TAB><name>`.
/// Several prefixes may share one exchange id.
pub fn load_ixp_prefix_table(
    reader: impl BufRead,
) -> Result<PrefixTable<IxpIdentity>, TableError> {
    let mut pairs = Vec::new();
    for item in data_lines(reader) {
        let (line_no, line) = item?;
        let mut fields = line.splitn(3, '\t');
        let (cidr, id, name) = match (fields.next(), fields.next(), fields.next()) {
            (Some(c), Some(i), Some(n)) => (c, i, n),
            _ => {
                return Err(parse_err(
                    line_no,
                    "expected `<CIDR><TAB><ixp-id><TAB><name>`",
                ))
            }
        };
        let prefix = parse_cidr_field(line_no, cidr)?;
        let id = IxpId::new(id)
            .ok_or_else(|| parse_err(line_no, format!("invalid IXP id token `{id}`")))?;
        pairs.push((
            prefix,
            IxpIdentity {
                id,
                name: name.to_string(),
            },
        ));
    }
    Ok(PrefixTable::from_entries(pairs))
}

/// Loads a prefix-to-country table. Line format: `<CIDR><TAB><ISO2>` with an
/// uppercase two-letter code.
pub fn load_geo_prefix_table(
    reader: impl BufRead,
) -> Result<PrefixTable<CountryCode>, TableError> {
    let mut pairs = Vec::new();
    for item in data_lines(reader) {
        let (line_no, line) = item?;
        let mut fields = line.split('\t');
        let (cidr, code) = match (fields.next(), fields.next(), fields.next()) {
            (Some(c), Some(cc), None) => (c, cc),
            _ => return Err(parse_err(line_no, "expected `<CIDR><TAB><ISO2>`")),
        };
        let prefix = parse_cidr_field(line_no, cidr)?;
        let code = CountryCode::parse(code)
            .ok_or_else(|| parse_err(line_no, format!("invalid country code `{code}`")))?;
        pairs.push((prefix, code));
    }
    Ok(PrefixTable::from_entries(pairs))
}

/// Attributes a majority country to an AS: each of its prefixes contributes
/// its full address span (2^(32-len)) to the country its base address
/// geolocates to; the country with the largest total wins, ties broken by the
/// lexicographically smallest code. `None` when the AS owns no prefixes or
/// none of them geolocate.
pub fn as_country(
    as_table: &PrefixTable<AsEntry>,
    geo_table: &PrefixTable<CountryCode>,
    asn: Asn,
) -> Option<CountryCode> {
    let mut totals: BTreeMap<CountryCode, u64> = BTreeMap::new();
    for (prefix, entry) in as_table.entries() {
        if *entry == AsEntry::Asn(asn) {
            if let Some(code) = geo_table.lookup(prefix.base()) {
                *totals.entry(*code).or_insert(0) += prefix.address_count();
            }
        }
    }
    // Ascending code order + strict `>` keeps the smallest code on ties.
    let mut best: Option<(CountryCode, u64)> = None;
    for (code, total) in totals {
        if best.is_none_or(|(_, t)| total > t) {
            best = Some((code, total));
        }
    }
    best.map(|(code, _)| code)
}
