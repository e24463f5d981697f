//! Binary soup snapshots.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! "SOUPF1" u16 version
//! u8 measure (0 loop, 1 disk, 2 massive) f64 mass bound
//! f64 λ, f64 δ, f64 t_min, u64 seed
//! u8 domain (0 unit disk, 1 Möbius image) f64 a_re, f64 a_im, f64 θ
//! u8 has window, f64 window radius
//! u64 loop count
//! per loop: u8 tag (0 polyline, 1 disk)
//!           polyline: u64 n, n × (f64 x, f64 y) | disk: f64 x, f64 y, f64 r
//!           f64 time length, i8 mark
//! ```
//! Cached diameters are recomputed on read.

use std::io::{Read, Write};

use super::{Loop, LoopShape, MarkedLoop, MarkedSoup, MeasureKind, SoupParams};
use crate::error::{Error, Result};
use crate::geometry::{Domain, DomainKind, MoebiusMap, Point};

pub const MAGIC: &[u8; 6] = b"SOUPF1";
pub const VERSION: u16 = 1;

struct Writer<W: Write>(W);

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        Ok(self.0.write_all(&[v])?)
    }
    fn u16(&mut self, v: u16) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn u64(&mut self, v: u64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
    fn f64(&mut self, v: f64) -> Result<()> {
        Ok(self.0.write_all(&v.to_le_bytes())?)
    }
}

struct Reader<R: Read>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

pub fn write_soup<W: Write>(soup: &MarkedSoup, out: W) -> Result<()> {
    let mut w = Writer(out);
    let p = &soup.params;
    w.0.write_all(MAGIC)?;
    w.u16(VERSION)?;
    let (tag, m) = match p.measure {
        MeasureKind::Loop => (0, 0.0),
        MeasureKind::Disk => (1, 0.0),
        MeasureKind::Massive { mass_bound } => (2, mass_bound),
    };
    w.u8(tag)?;
    w.f64(m)?;
    w.f64(p.lambda)?;
    w.f64(p.delta)?;
    w.f64(p.t_min)?;
    w.u64(p.seed)?;
    let (dtag, f) = match (p.domain.kind, p.domain.moebius) {
        (DomainKind::MoebiusImageOfUnitDisk, Some(f)) => (1, f),
        _ => (0, MoebiusMap::identity()),
    };
    w.u8(dtag)?;
    w.f64(f.a().x)?;
    w.f64(f.a().y)?;
    w.f64(f.theta())?;
    w.u8(p.window.is_some() as u8)?;
    w.f64(p.window.unwrap_or(0.0))?;
    w.u64(soup.loops.len() as u64)?;
    for l in &soup.loops {
        match l.curve.shape() {
            LoopShape::Polyline(pts) => {
                w.u8(0)?;
                w.u64(pts.len() as u64)?;
                for q in pts {
                    w.f64(q.x)?;
                    w.f64(q.y)?;
                }
            }
            LoopShape::DiskBoundary { center, radius } => {
                w.u8(1)?;
                w.f64(center.x)?;
                w.f64(center.y)?;
                w.f64(*radius)?;
            }
        }
        w.f64(l.curve.time_length())?;
        w.0.write_all(&l.mark.to_le_bytes())?;
    }
    w.0.flush()?;
    Ok(())
}

pub fn read_soup<R: Read>(input: R) -> Result<MarkedSoup> {
    let mut r = Reader(input);
    if &r.bytes::<6>()? != MAGIC {
        return Err(Error::Format("not a soup snapshot (bad magic)".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}")));
    }
    let tag = r.u8()?;
    let m = r.f64()?;
    let measure = match tag {
        0 => MeasureKind::Loop,
        1 => MeasureKind::Disk,
        2 => MeasureKind::Massive { mass_bound: m },
        t => return Err(Error::Format(format!("unknown measure tag {t}"))),
    };
    let lambda = r.f64()?;
    let delta = r.f64()?;
    let t_min = r.f64()?;
    let seed = r.u64()?;
    let dtag = r.u8()?;
    let (a_re, a_im, theta) = (r.f64()?, r.f64()?, r.f64()?);
    let domain = match dtag {
        0 => Domain::unit_disk(),
        1 => Domain::moebius_image(MoebiusMap::new(Point::new(a_re, a_im), theta).map_err(|e| Error::Format(e.to_string()))?),
        t => return Err(Error::Format(format!("unknown domain tag {t}"))),
    };
    let has_window = r.u8()?;
    let wr = r.f64()?;
    let window = (has_window != 0).then_some(wr);
    let count = r.u64()?;
    let mut loops = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let curve = match r.u8()? {
            0 => {
                let n = r.u64()?;
                if n > 1 << 28 {
                    return Err(Error::Format(format!("polyline with {n} points")));
                }
                let mut pts = Vec::with_capacity(n as usize);
                for _ in 0..n {
                    pts.push(Point::new(r.f64()?, r.f64()?));
                }
                let t = r.f64()?;
                Loop::polyline(pts, t).map_err(|e| Error::Format(e.to_string()))?
            }
            1 => {
                let (x, y, rad) = (r.f64()?, r.f64()?, r.f64()?);
                let t = r.f64()?;
                let mut l = Loop::disk(Point::new(x, y), rad).map_err(|e| Error::Format(e.to_string()))?;
                l.time_length = t;
                l
            }
            t => return Err(Error::Format(format!("unknown loop tag {t}"))),
        };
        let mark = i8::from_le_bytes(r.bytes()?);
        if mark != 1 && mark != -1 {
            return Err(Error::Format(format!("mark {mark} is not ±1")));
        }
        loops.push(MarkedLoop { curve, mark });
    }
    let mut params = SoupParams::new(lambda, delta, measure, seed);
    params.domain = domain;
    params.t_min = t_min;
    params.window = window;
    Ok(MarkedSoup { loops, params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loop_measures::sample_soup;

    #[test]
    fn round_trip_is_bit_exact() {
        for kind in [MeasureKind::Loop, MeasureKind::Disk, MeasureKind::Massive { mass_bound: 0.7 }] {
            let p = SoupParams::new(1.5, 0.3, kind, 21).with_window(0.6);
            let soup = sample_soup(&p).unwrap();
            let mut buf = Vec::new();
            write_soup(&soup, &mut buf).unwrap();
            let back = read_soup(buf.as_slice()).unwrap();
            let mut buf2 = Vec::new();
            write_soup(&back, &mut buf2).unwrap();
            assert_eq!(buf, buf2);
            assert_eq!(back.loops, soup.loops);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_soup(&b"NOTSOUP..."[..]), Err(Error::Format(_))));
        assert!(matches!(read_soup(&b"SOUPF1"[..]), Err(Error::Io(_))));
    }
}
