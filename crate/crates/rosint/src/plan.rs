//! Target selection: a full-coverage pseudorandom permutation of the scan's
//! address space.
//!
//! Addresses are visited by iterating the multiplicative cyclic group modulo
//! the smallest prime `p` greater than the address-space size. The generator
//! is a primitive root picked deterministically from the seed, so the same
//! `(TargetSpec, seed)` pair always yields the same sequence, every included
//! address is emitted exactly once per cycle, and no destination network sees
//! a burst of sequential probes.

use std::net::Ipv4Addr;
use std::path::Path;

use ipnet::Ipv4Net;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest prime above 2^32, used whenever the target universe is the whole
/// IPv4 space so plan construction stays O(1).
const FULL_IPV4_PRIME: u64 = 4_294_967_311;

/// How far above `n` we are willing to search for a prime before giving up.
/// Prime gaps below 2^32 are tiny; this window is never expected to bind.
const PRIME_SEARCH_WINDOW: u64 = 1 << 22;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("target spec needs at least one include range")]
    NoIncludeRanges,
    #[error("port 0 is not probeable")]
    InvalidPort,
    #[error("include ranges minus exclusions leave nothing to scan")]
    EmptyTargetSpace,
    #[error("no prime found in ({0}, {0}+{PRIME_SEARCH_WINDOW}]")]
    PrimeSearchFailure(u64),
    #[error("bad CIDR {line:?} in {file} line {line_no}: {reason}")]
    BadCidrLine {
        file: String,
        line_no: usize,
        line: String,
        reason: String,
    },
    #[error("reading {file}: {source}")]
    Io {
        file: String,
        source: std::io::Error,
    },
}

/// The scan universe: include ranges, a blocklist, and the TCP port probed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetSpec {
    pub include_ranges: Vec<Ipv4Net>,
    pub exclude_ranges: Vec<Ipv4Net>,
    pub port: u16,
}

impl TargetSpec {
    pub fn new(
        include_ranges: Vec<Ipv4Net>,
        exclude_ranges: Vec<Ipv4Net>,
        port: u16,
    ) -> Result<Self, PlanError> {
        if include_ranges.is_empty() {
            return Err(PlanError::NoIncludeRanges);
        }
        if port == 0 {
            return Err(PlanError::InvalidPort);
        }
        Ok(Self {
            include_ranges,
            exclude_ranges,
            port,
        })
    }

    /// Convenience constructor from CIDR strings; bare addresses are read
    /// as /32.
    pub fn parse(include: &[&str], exclude: &[&str], port: u16) -> Result<Self, PlanError> {
        let parse_all = |items: &[&str]| -> Result<Vec<Ipv4Net>, PlanError> {
            items
                .iter()
                .map(|s| {
                    parse_cidr(s).ok_or_else(|| PlanError::BadCidrLine {
                        file: "<inline>".into(),
                        line_no: 0,
                        line: s.to_string(),
                        reason: "not an IPv4 CIDR".into(),
                    })
                })
                .collect()
        };
        Self::new(parse_all(include)?, parse_all(exclude)?, port)
    }

    pub fn single(addr: Ipv4Addr, port: u16) -> Self {
        Self {
            include_ranges: vec![Ipv4Net::new(addr, 32).expect("/32 is always valid")],
            exclude_ranges: Vec::new(),
            port,
        }
    }

    /// True when every include range falls inside loopback or RFC1918 space.
    pub fn is_private_only(&self) -> bool {
        self.include_ranges.iter().all(|net| {
            let (start, end) = net_bounds(net);
            PRIVATE_SPANS
                .iter()
                .any(|&(lo, hi)| lo <= start && end <= hi)
        })
    }
}

/// Loopback plus the RFC1918 blocks, as inclusive u32 spans.
const PRIVATE_SPANS: &[(u32, u32)] = &[
    (0x7F00_0000, 0x7FFF_FFFF), // 127.0.0.0/8
    (0x0A00_0000, 0x0AFF_FFFF), // 10.0.0.0/8
    (0xAC10_0000, 0xAC1F_FFFF), // 172.16.0.0/12
    (0xC0A8_0000, 0xC0A8_FFFF), // 192.168.0.0/16
];

fn parse_cidr(s: &str) -> Option<Ipv4Net> {
    let s = s.trim();
    if let Ok(net) = s.parse::<Ipv4Net>() {
        return Some(net);
    }
    s.parse::<Ipv4Addr>()
        .ok()
        .map(|a| Ipv4Net::new(a, 32).expect("/32 is always valid"))
}

/// Load one-CIDR-per-line files (blocklists, target lists). `#` starts a
/// comment; blank lines are skipped; bare addresses are read as /32.
pub fn load_cidr_file(path: &Path) -> Result<Vec<Ipv4Net>, PlanError> {
    let text = std::fs::read_to_string(path).map_err(|source| PlanError::Io {
        file: path.display().to_string(),
        source,
    })?;
    let mut nets = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let net = parse_cidr(line).ok_or_else(|| PlanError::BadCidrLine {
            file: path.display().to_string(),
            line_no: idx + 1,
            line: line.to_string(),
            reason: "not an IPv4 CIDR".into(),
        })?;
        nets.push(net);
    }
    Ok(nets)
}

fn net_bounds(net: &Ipv4Net) -> (u32, u32) {
    (u32::from(net.network()), u32::from(net.broadcast()))
}

/// Sorted, disjoint, inclusive u32 spans.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Intervals(Vec<(u32, u32)>);

impl Intervals {
    fn from_nets(nets: &[Ipv4Net]) -> Self {
        let mut spans: Vec<(u32, u32)> = nets.iter().map(net_bounds).collect();
        spans.sort_unstable();
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(spans.len());
        for (start, end) in spans {
            match merged.last_mut() {
                // Merge overlapping and exactly-adjacent spans.
                Some((_, prev_end)) if start <= prev_end.saturating_add(1) => {
                    *prev_end = (*prev_end).max(end);
                }
                _ => merged.push((start, end)),
            }
        }
        Intervals(merged)
    }

    fn total(&self) -> u64 {
        self.0
            .iter()
            .map(|&(s, e)| u64::from(e) - u64::from(s) + 1)
            .sum()
    }

    fn contains(&self, addr: u32) -> bool {
        let idx = self.0.partition_point(|&(s, _)| s <= addr);
        idx > 0 && addr <= self.0[idx - 1].1
    }

    /// Number of addresses shared with `other`.
    fn overlap(&self, other: &Intervals) -> u64 {
        let mut count = 0u64;
        for &(s, e) in &self.0 {
            for &(os, oe) in &other.0 {
                let lo = s.max(os);
                let hi = e.min(oe);
                if lo <= hi {
                    count += u64::from(hi) - u64::from(lo) + 1;
                }
            }
        }
        count
    }
}

/// Iteration state of the multiplicative-group permutation. Construction is
/// pure; iteration is single-consumer (shard or lock to share it).
#[derive(Debug, Clone)]
pub struct AddressPlan {
    include: Intervals,
    cumulative: Vec<u64>,
    exclude: Intervals,
    universe_size: u64,
    port: u16,
    seed: u64,
    modulus: u64,
    generator: u64,
    start: u64,
    cursor: u64,
    exhausted: bool,
    emitted_count: u64,
}

/// Build a plan over `spec` whose permutation is fixed by `seed`.
///
/// The modulus is the smallest prime above the include-universe size (a fixed
/// prime above 2^32 for full-IPv4 scans) and the generator is the first
/// primitive root at or after a seed-derived candidate.
pub fn build_plan(spec: &TargetSpec, seed: u64) -> Result<AddressPlan, PlanError> {
    if spec.include_ranges.is_empty() {
        return Err(PlanError::NoIncludeRanges);
    }
    if spec.port == 0 {
        return Err(PlanError::InvalidPort);
    }
    let include = Intervals::from_nets(&spec.include_ranges);
    let exclude = Intervals::from_nets(&spec.exclude_ranges);
    let universe_size = include.total();
    if universe_size - include.overlap(&exclude) == 0 {
        return Err(PlanError::EmptyTargetSpace);
    }

    let modulus = if universe_size == 1 << 32 {
        FULL_IPV4_PRIME
    } else {
        next_prime_above(universe_size)?
    };
    let generator = derive_generator(modulus, seed);
    let start = 1 + splitmix64(seed ^ 0x5e97_1e9a_11ce_55ed) % (modulus - 1);

    let mut cumulative = Vec::with_capacity(include.0.len() + 1);
    let mut acc = 0u64;
    cumulative.push(0);
    for &(s, e) in &include.0 {
        acc += u64::from(e) - u64::from(s) + 1;
        cumulative.push(acc);
    }

    Ok(AddressPlan {
        include,
        cumulative,
        exclude,
        universe_size,
        port: spec.port,
        seed,
        modulus,
        generator,
        start,
        cursor: start,
        exhausted: false,
        emitted_count: 0,
    })
}

impl AddressPlan {
    /// Advance the group cursor and return the next in-range, non-excluded
    /// address; `None` once the cycle has wrapped back to its start element.
    pub fn next_address(&mut self) -> Option<Ipv4Addr> {
        if self.exhausted {
            return None;
        }
        loop {
            self.cursor = mulmod(self.cursor, self.generator, self.modulus);
            let last = self.cursor == self.start;
            if last {
                self.exhausted = true;
            }
            if self.cursor <= self.universe_size {
                let addr = self.index_to_addr(self.cursor);
                if !self.exclude.contains(addr) {
                    self.emitted_count += 1;
                    return Some(Ipv4Addr::from(addr));
                }
            }
            if last {
                return None;
            }
        }
    }

    /// 1-based universe index -> address.
    fn index_to_addr(&self, index: u64) -> u32 {
        let span = self.cumulative.partition_point(|&c| c < index) - 1;
        let offset = index - 1 - self.cumulative[span];
        self.include.0[span].0 + offset as u32
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    pub fn emitted_count(&self) -> u64 {
        self.emitted_count
    }

    /// Size of the include universe before exclusions.
    pub fn universe_size(&self) -> u64 {
        self.universe_size
    }

    #[cfg(test)]
    fn with_parameters(spec: &TargetSpec, modulus: u64, generator: u64, start: u64) -> Self {
        let mut plan = build_plan(spec, 0).expect("valid spec");
        plan.modulus = modulus;
        plan.generator = generator;
        plan.start = start;
        plan.cursor = start;
        plan
    }
}

impl Iterator for AddressPlan {
    type Item = Ipv4Addr;

    fn next(&mut self) -> Option<Ipv4Addr> {
        self.next_address()
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mulmod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn powmod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base, m);
        }
        base = mulmod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin; this witness set is exact for all u64.
fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0u32;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn next_prime_above(n: u64) -> Result<u64, PlanError> {
    let mut candidate = n + 1;
    if candidate <= 2 {
        return Ok(2);
    }
    if candidate % 2 == 0 {
        if candidate == 2 {
            return Ok(2);
        }
        candidate += 1;
    }
    let limit = n + PRIME_SEARCH_WINDOW;
    while candidate <= limit {
        if is_prime(candidate) {
            return Ok(candidate);
        }
        candidate += 2;
    }
    Err(PlanError::PrimeSearchFailure(n))
}

fn distinct_prime_factors(mut n: u64) -> Vec<u64> {
    let mut factors = Vec::new();
    let mut push = |f: u64, n: &mut u64| {
        factors.push(f);
        while *n % f == 0 {
            *n /= f;
        }
    };
    if n % 2 == 0 {
        push(2, &mut n);
    }
    let mut f = 3u64;
    while f * f <= n {
        if n % f == 0 {
            push(f, &mut n);
        }
        f += 2;
    }
    if n > 1 {
        factors.push(n);
    }
    factors
}

fn is_primitive_root(g: u64, modulus: u64, factors: &[u64]) -> bool {
    let order = modulus - 1;
    factors.iter().all(|&q| powmod(g, order / q, modulus) != 1)
}

/// First primitive root at or after a seed-derived candidate, wrapping back
/// to 2 if the search passes the modulus.
fn derive_generator(modulus: u64, seed: u64) -> u64 {
    if modulus <= 3 {
        // Groups of order 1 and 2: the only generators are 1 and 2.
        return modulus - 1;
    }
    let factors = distinct_prime_factors(modulus - 1);
    let mut g = 2 + splitmix64(seed) % (modulus - 3);
    loop {
        if is_primitive_root(g, modulus, &factors) {
            return g;
        }
        g += 1;
        if g >= modulus {
            g = 2;
        }
    }
}
