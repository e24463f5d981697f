//! Samples a marked loop soup, writes a snapshot and reads it back.

use loopsoup::loop_measures::snapshot::{read_soup, write_soup};
use loopsoup::loop_measures::{sample_soup, MeasureKind, SoupParams};

fn main() -> loopsoup::Result<()> {
    let soup = sample_soup(&SoupParams::new(1.0, 0.1, MeasureKind::Loop, 7))?;
    let mut bytes = Vec::new();
    write_soup(&soup, &mut bytes)?;
    let back = read_soup(bytes.as_slice())?;
    let net: i64 = soup.loops.iter().map(|l| l.mark as i64).sum();
    println!("{} loops, net mark {net}, snapshot {} bytes, round trip exact: {}", soup.loops.len(), bytes.len(), back == soup);
    Ok(())
}
