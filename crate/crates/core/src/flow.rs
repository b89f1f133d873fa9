//! Packet and flow records, IPv4 addresses and the weighted-octet distance
//! shared by every detector.
//!
//! Flow and packet datasets travel as CSV:
//!
//! ```text
//! start_time,duration,size_bytes,src_ip,label     (flows; label is 0, 1 or empty)
//! time,size_bytes,user_ip                          (packets)
//! ```
//!
//! Reals are written with at most 9 significant digits.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{Error, Result};

/// An IPv4 address as four octets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpAddress(pub [u8; 4]);

impl IpAddress {
    pub const fn new(a: u8, b: u8, c: u8, d: u8) -> Self {
        IpAddress([a, b, c, d])
    }

    pub fn octets(&self) -> [u8; 4] {
        self.0
    }

    /// Octet `k` (0-based) multiplied by `256^(3-k)`: the embedding in which
    /// the weighted-octet distance becomes an L1 norm.
    pub fn scaled(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (k, o) in self.0.iter().enumerate() {
            out[k] = f64::from(*o) * OCTET_WEIGHTS[k];
        }
        out
    }
}

pub(crate) const OCTET_WEIGHTS: [f64; 4] = [16_777_216.0, 65_536.0, 256.0, 1.0];

impl fmt::Display for IpAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "{a}.{b}.{c}.{d}")
    }
}

impl FromStr for IpAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('.').collect();
        if parts.len() != 4 {
            return Err(Error::config(format!("`{s}` is not a dotted-quad IPv4 address")));
        }
        let mut octets = [0u8; 4];
        for (slot, part) in octets.iter_mut().zip(&parts) {
            *slot = part
                .parse::<u8>()
                .map_err(|_| Error::config(format!("`{s}` has an octet outside 0..=255")))?;
        }
        Ok(IpAddress(octets))
    }
}

/// `sum_k 256^(4-k) |a_k - b_k|`, a metric on IPv4 addresses.
pub fn ip_distance(a: IpAddress, b: IpAddress) -> f64 {
    let d: u64 = a
        .0
        .iter()
        .zip(b.0.iter())
        .zip([1u64 << 24, 1 << 16, 1 << 8, 1])
        .map(|((x, y), w)| w * u64::from(x.abs_diff(*y)))
        .sum();
    d as f64
}

/// Ground-truth tag attached by the simulator. Detectors never read it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Nominal,
    Anomalous,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub user: IpAddress,
    pub size_bytes: f64,
    pub start_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord {
    pub user: IpAddress,
    pub size_bytes: f64,
    pub duration: f64,
    pub start_time: f64,
    pub label: Option<Label>,
}

impl FlowRecord {
    pub fn is_anomalous(&self) -> bool {
        self.label == Some(Label::Anomalous)
    }
}

/// A flow with its user replaced by (cluster id, distance to cluster center).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistilledFlow {
    pub cluster: usize,
    pub dist_to_center: f64,
    pub size_bytes: f64,
    pub duration: f64,
    pub start_time: f64,
}

/// A flow with its user replaced by (flows from that user, distance to the server).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArtFlow {
    pub flow_count: usize,
    pub dist_to_server: f64,
    pub size_bytes: f64,
    pub duration: f64,
    pub start_time: f64,
}

impl ArtFlow {
    pub fn features(&self) -> [f64; 4] {
        [
            self.flow_count as f64,
            self.dist_to_server,
            self.size_bytes,
            self.duration,
        ]
    }
}

/// Anything positioned on the time axis.
pub trait Timestamped {
    fn start_time(&self) -> f64;
}

macro_rules! timestamped {
    ($($t:ty),*) => {
        $(impl Timestamped for $t {
            fn start_time(&self) -> f64 {
                self.start_time
            }
        })*
    };
}
timestamped!(PacketRecord, FlowRecord, DistilledFlow, ArtFlow);

/// Index of the first record whose start time is smaller than its predecessor's.
pub fn first_unsorted<T: Timestamped>(items: &[T]) -> Option<usize> {
    items
        .windows(2)
        .position(|w| w[1].start_time() < w[0].start_time())
        .map(|i| i + 1)
}

pub(crate) fn ensure_sorted<T: Timestamped>(items: &[T]) -> Result<()> {
    match first_unsorted(items) {
        Some(index) => Err(Error::Unsorted { index }),
        None => Ok(()),
    }
}

/// Formats a real with at most 9 significant digits, shortest form.
pub fn fmt_real(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    if rounded == 0.0 {
        return "0".into();
    }
    format!("{rounded}")
}

pub const FLOW_HEADER: [&str; 5] = ["start_time", "duration", "size_bytes", "src_ip", "label"];
pub const PACKET_HEADER: [&str; 3] = ["time", "size_bytes", "user_ip"];

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = found.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::parse(
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<&str> {
    rec.get(i)
        .map(str::trim)
        .ok_or_else(|| Error::parse(line, format!("missing column {}", i + 1)))
}

fn real(rec: &csv::StringRecord, i: usize, line: usize, name: &str) -> Result<f64> {
    let s = field(rec, i, line)?;
    let v: f64 = s
        .parse()
        .map_err(|_| Error::parse(line, format!("`{s}` is not a number ({name})")))?;
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::parse(line, format!("{name} must be a finite nonnegative number")));
    }
    Ok(v)
}

fn address(rec: &csv::StringRecord, i: usize, line: usize) -> Result<IpAddress> {
    field(rec, i, line)?
        .parse()
        .map_err(|e: Error| Error::parse(line, e.to_string()))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

/// Reads a flow CSV. Records must be sorted by start time.
pub fn read_flows<R: Read>(r: R) -> Result<Vec<FlowRecord>> {
    let mut rdr = reader(r);
    check_header(rdr.headers()?, &FLOW_HEADER)?;
    let mut flows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let label = match field(&rec, 4, line)? {
            "" => None,
            "0" => Some(Label::Nominal),
            "1" => Some(Label::Anomalous),
            other => return Err(Error::parse(line, format!("label must be 0, 1 or empty, got `{other}`"))),
        };
        flows.push(FlowRecord {
            start_time: real(&rec, 0, line, "start_time")?,
            duration: real(&rec, 1, line, "duration")?,
            size_bytes: real(&rec, 2, line, "size_bytes")?,
            user: address(&rec, 3, line)?,
            label,
        });
    }
    ensure_sorted(&flows)?;
    Ok(flows)
}

pub fn write_flows<W: Write>(w: W, flows: &[FlowRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(FLOW_HEADER)?;
    for f in flows {
        let label = match f.label {
            None => "",
            Some(Label::Nominal) => "0",
            Some(Label::Anomalous) => "1",
        };
        wtr.write_record([
            fmt_real(f.start_time),
            fmt_real(f.duration),
            fmt_real(f.size_bytes),
            f.user.to_string(),
            label.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_packets<R: Read>(r: R) -> Result<Vec<PacketRecord>> {
    let mut rdr = reader(r);
    check_header(rdr.headers()?, &PACKET_HEADER)?;
    let mut packets = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        packets.push(PacketRecord {
            start_time: real(&rec, 0, line, "time")?,
            size_bytes: real(&rec, 1, line, "size_bytes")?,
            user: address(&rec, 2, line)?,
        });
    }
    Ok(packets)
}

pub fn write_packets<W: Write>(w: W, packets: &[PacketRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(PACKET_HEADER)?;
    for p in packets {
        wtr.write_record([fmt_real(p.start_time), fmt_real(p.size_bytes), p.user.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ip(s: &str) -> IpAddress {
        s.parse().unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(ip_distance(ip("10.0.0.1"), ip("10.0.0.5")), 4.0);
        assert_eq!(ip_distance(ip("192.168.1.7"), ip("192.168.1.7")), 0.0);
        assert_eq!(ip_distance(ip("192.168.2.1"), ip("192.168.1.1")), 256.0);
        assert_eq!(ip_distance(ip("13.0.0.0"), ip("10.0.0.0")), 3.0 * 16_777_216.0);
    }

    #[test]
    fn rejects_bad_addresses() {
        assert!("10.0.0".parse::<IpAddress>().is_err());
        assert!("10.0.0.256".parse::<IpAddress>().is_err());
        assert!("a.b.c.d".parse::<IpAddress>().is_err());
    }

    #[test]
    fn real_formatting() {
        assert_eq!(fmt_real(0.0), "0");
        assert_eq!(fmt_real(1.5), "1.5");
        assert_eq!(fmt_real(4999.123456789), "4999.12346");
        assert_eq!(fmt_real(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
    }

    #[test]
    fn flow_csv_rejects_wrong_header_and_unsorted() {
        let bad = "start,duration,size_bytes,src_ip,label\n";
        assert!(matches!(read_flows(bad.as_bytes()), Err(Error::Parse { line: 1, .. })));
        let unsorted = "start_time,duration,size_bytes,src_ip,label\n5,1,10,10.0.0.1,\n2,1,10,10.0.0.1,0\n";
        assert!(matches!(read_flows(unsorted.as_bytes()), Err(Error::Unsorted { index: 1 })));
        let badlabel = "start_time,duration,size_bytes,src_ip,label\n5,1,10,10.0.0.1,x\n";
        assert!(matches!(read_flows(badlabel.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn packet_csv_roundtrip() {
        let packets = vec![
            PacketRecord { user: ip("10.0.0.1"), size_bytes: 64.0, start_time: 0.25 },
            PacketRecord { user: ip("10.0.0.2"), size_bytes: 1500.0, start_time: 1.0 },
        ];
        let mut buf = Vec::new();
        write_packets(&mut buf, &packets).unwrap();
        assert_eq!(read_packets(buf.as_slice()).unwrap(), packets);
    }

    fn arb_ip() -> impl Strategy<Value = IpAddress> {
        any::<[u8; 4]>().prop_map(IpAddress)
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in arb_ip(), b in arb_ip(), c in arb_ip()) {
            let ab = ip_distance(a, b);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ip_distance(b, a));
            prop_assert_eq!(ab == 0.0, a == b);
            prop_assert!(ip_distance(a, c) <= ab + ip_distance(b, c));
        }

        #[test]
        fn distance_is_l1_in_scaled_space(a in arb_ip(), b in arb_ip()) {
            let (sa, sb) = (a.scaled(), b.scaled());
            let l1: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum();
            prop_assert_eq!(l1, ip_distance(a, b));
        }

        #[test]
        fn flow_csv_roundtrip(
            rows in prop::collection::vec(
                (0.0f64..1e5, 0.0f64..1e3, 0.0f64..1e7, arb_ip(), prop::option::of(any::<bool>())),
                0..40,
            )
        ) {
            let mut flows: Vec<FlowRecord> = rows
                .into_iter()
                .map(|(t, d, b, user, l)| FlowRecord {
                    user,
                    size_bytes: b,
                    duration: d,
                    start_time: t,
                    label: l.map(|x| if x { Label::Anomalous } else { Label::Nominal }),
                })
                .collect();
            flows.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
            let mut buf = Vec::new();
            write_flows(&mut buf, &flows).unwrap();
            let back = read_flows(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), flows.len());
            for (x, y) in flows.iter().zip(&back) {
                prop_assert_eq!(x.user, y.user);
                prop_assert_eq!(x.label, y.label);
                for (u, v) in [(x.start_time, y.start_time), (x.duration, y.duration), (x.size_bytes, y.size_bytes)] {
                    prop_assert!((u - v).abs() <= 1e-8 * u.abs().max(1e-300));
                }
            }
            // a second pass is exact
            let mut buf2 = Vec::new();
            write_flows(&mut buf2, &back).unwrap();
            prop_assert_eq!(buf, buf2);
        }
    }
}
