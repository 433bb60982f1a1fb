//! On-disk formats.
//!
//! * Sample sets, binary: magic `QHDSAMP1`, little-endian `u64` count, `u64` seed,
//!   `u32` generation, `u32` reserved (0), then `count` pairs of `f64` (x, y).
//! * Sample sets, CSV: header `x,y`, one sample per line.
//! * Density matrices: `DIM <n>` followed by n lines of n comma-separated
//!   complex literals `re+imi` (shortest round-trip decimal form).
//! * Log-likelihood traces: CSV `iteration,loglik`.
//! * Phase-space grids: CSV `x,y,value`, x fastest.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::qhd::{QuadratureSample, SampleMeta, SampleSet};
use crate::quasiprob::{GridSpec, PhaseSpaceGrid};

pub const SAMPLE_MAGIC: &[u8; 8] = b"QHDSAMP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleFormat {
    Binary,
    Csv,
}

impl SampleFormat {
    /// `.csv` selects CSV, anything else binary.
    pub fn from_path(path: &Path) -> SampleFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => SampleFormat::Csv,
            _ => SampleFormat::Binary,
        }
    }
}

pub fn write_samples_binary<W: Write>(mut w: W, set: &SampleSet) -> Result<()> {
    w.write_all(SAMPLE_MAGIC)?;
    w.write_all(&(set.count() as u64).to_le_bytes())?;
    w.write_all(&set.meta.seed.to_le_bytes())?;
    w.write_all(&set.meta.generation.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    for s in set.iter() {
        w.write_all(&s.x.to_le_bytes())?;
        w.write_all(&s.y.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_exact_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_samples_binary<R: Read>(mut r: R) -> Result<SampleSet> {
    let magic: [u8; 8] = read_exact_array(&mut r)?;
    if &magic != SAMPLE_MAGIC {
        return Err(Error::parse(0, "missing QHDSAMP1 magic"));
    }
    let count = u64::from_le_bytes(read_exact_array(&mut r)?);
    let seed = u64::from_le_bytes(read_exact_array(&mut r)?);
    let generation = u32::from_le_bytes(read_exact_array(&mut r)?);
    let _reserved = u32::from_le_bytes(read_exact_array(&mut r)?);
    let count = usize::try_from(count).map_err(|_| Error::parse(0, "sample count overflows"))?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != count * 16 {
        return Err(Error::parse(
            0,
            format!("expected {} payload bytes, found {}", count * 16, payload.len()),
        ));
    }
    let samples = payload
        .chunks_exact(16)
        .map(|c| {
            let x = f64::from_le_bytes(c[..8].try_into().unwrap());
            let y = f64::from_le_bytes(c[8..].try_into().unwrap());
            QuadratureSample::new(x, y)
        })
        .collect();
    Ok(SampleSet::new(
        samples,
        SampleMeta {
            seed,
            source: "binary".into(),
            generation,
            workers: 0,
        },
    ))
}

pub fn write_samples_csv<W: Write>(mut w: W, set: &SampleSet) -> Result<()> {
    writeln!(w, "x,y")?;
    for s in set.iter() {
        writeln!(w, "{:e},{:e}", s.x, s.y)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads CSV samples. Seed and generation are not part of the CSV format and
/// come back as zero.
pub fn read_samples_csv<R: BufRead>(r: R) -> Result<SampleSet> {
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim().replace(' ', "") == "x,y" => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(Error::parse(1, "expected header 'x,y'")),
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let (xs, ys) = t
            .split_once(',')
            .ok_or_else(|| Error::parse(i + 1, "expected two columns"))?;
        let x = parse_f64(xs, i + 1)?;
        let y = parse_f64(ys, i + 1)?;
        samples.push(QuadratureSample::new(x, y));
    }
    Ok(SampleSet::new(
        samples,
        SampleMeta {
            source: "csv".into(),
            ..SampleMeta::default()
        },
    ))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::parse(line, format!("bad number '{}': {e}", s.trim())))
}

pub fn save_samples(path: &Path, set: &SampleSet, format: SampleFormat) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    match format {
        SampleFormat::Binary => write_samples_binary(w, set),
        SampleFormat::Csv => write_samples_csv(w, set),
    }
}

/// Loads a sample file, sniffing the binary magic before falling back to CSV.
pub fn load_samples(path: &Path) -> Result<SampleSet> {
    let mut r = BufReader::new(File::open(path)?);
    let head = r.fill_buf()?;
    let mut set = if head.starts_with(SAMPLE_MAGIC) {
        read_samples_binary(r)?
    } else {
        read_samples_csv(r)?
    };
    set.meta.source = path.display().to_string();
    Ok(set)
}

/// Formats a complex number as `re+imi` with shortest round-trip digits.
pub fn format_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{}{:e}i", z.re, sign, z.im.abs())
}

pub fn parse_complex(s: &str) -> std::result::Result<Complex64, String> {
    let t = s.trim();
    let body = t
        .strip_suffix('i')
        .ok_or_else(|| format!("complex literal '{t}' must end in 'i'"))?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'))
        .ok_or_else(|| format!("complex literal '{t}' has no imaginary part"))?;
    let re = body[..split]
        .parse::<f64>()
        .map_err(|e| format!("bad real part in '{t}': {e}"))?;
    let im = body[split..]
        .parse::<f64>()
        .map_err(|e| format!("bad imaginary part in '{t}': {e}"))?;
    Ok(Complex64::new(re, im))
}

pub fn write_density<W: Write>(mut w: W, rho: &DensityMatrix) -> Result<()> {
    let d = rho.dim();
    writeln!(w, "DIM {d}")?;
    for i in 0..d {
        let row: Vec<String> = (0..d).map(|j| format_complex(rho.get(i, j))).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_density<R: BufRead>(r: R) -> Result<DensityMatrix> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::parse(1, "empty density file"))??;
    let dim: usize = header
        .trim()
        .strip_prefix("DIM")
        .ok_or_else(|| Error::parse(1, "expected 'DIM <n>' header"))?
        .trim()
        .parse()
        .map_err(|e| Error::parse(1, format!("bad dimension: {e}")))?;
    let mut entries = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let line = lines
            .next()
            .ok_or_else(|| Error::parse(i + 2, "missing matrix row"))??;
        let row: Vec<&str> = line.split(',').collect();
        if row.len() != dim {
            return Err(Error::parse(
                i + 2,
                format!("expected {dim} entries, found {}", row.len()),
            ));
        }
        for cell in row {
            entries.push(parse_complex(cell).map_err(|m| Error::parse(i + 2, m))?);
        }
    }
    DensityMatrix::from_matrix(DMatrix::from_row_slice(dim, dim, &entries))
}

pub fn save_density(path: &Path, rho: &DensityMatrix) -> Result<()> {
    write_density(BufWriter::new(File::create(path)?), rho)
}

pub fn load_density(path: &Path) -> Result<DensityMatrix> {
    read_density(BufReader::new(File::open(path)?))
}

pub fn write_loglik_trace<W: Write>(mut w: W, trace: &[f64]) -> Result<()> {
    writeln!(w, "iteration,loglik")?;
    for (i, l) in trace.iter().enumerate() {
        writeln!(w, "{i},{l:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_loglik_trace<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate().skip(1) {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (_, v) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(i + 1, "expected two columns"))?;
        out.push(parse_f64(v, i + 1)?);
    }
    Ok(out)
}

pub fn write_grid_csv<W: Write>(mut w: W, grid: &PhaseSpaceGrid) -> Result<()> {
    writeln!(w, "x,y,value")?;
    let s = &grid.spec;
    for j in 0..s.ny {
        for i in 0..s.nx {
            writeln!(w, "{:e},{:e},{:e}", s.x(i), s.y(j), grid.value(i, j))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads grid values; bounds and resolution are recovered from the node
/// coordinates, overflow and source from the caller's sidecar (if any).
pub fn read_grid_csv<R: BufRead>(r: R) -> Result<PhaseSpaceGrid> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut values = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line.trim() != "x,y,value" {
                return Err(Error::parse(1, "expected header 'x,y,value'"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(Error::parse(i + 1, "expected three columns"));
        }
        xs.push(parse_f64(cols[0], i + 1)?);
        ys.push(parse_f64(cols[1], i + 1)?);
        values.push(parse_f64(cols[2], i + 1)?);
    }
    if values.is_empty() {
        return Err(Error::parse(1, "grid has no nodes"));
    }
    let nx = ys.iter().take_while(|&&y| y == ys[0]).count();
    if nx < 2 || values.len() % nx != 0 {
        return Err(Error::parse(1, "grid is not rectangular"));
    }
    let ny = values.len() / nx;
    let spec = GridSpec::new(xs[0], xs[nx - 1], ys[0], ys[values.len() - 1], nx, ny)?;
    PhaseSpaceGrid::from_values(spec, values, 0.0, "csv")
}

pub fn save_grid(path: &Path, grid: &PhaseSpaceGrid) -> Result<()> {
    write_grid_csv(BufWriter::new(File::create(path)?), grid)
}

pub fn load_grid(path: &Path) -> Result<PhaseSpaceGrid> {
    read_grid_csv(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_loss, coherent_state, density_from_pure};
    use proptest::prelude::*;

    #[test]
    fn binary_header_layout() {
        let set = SampleSet::new(
            vec![QuadratureSample::new(1.5, -2.0)],
            SampleMeta {
                seed: 7,
                generation: 2,
                ..SampleMeta::default()
            },
        );
        let mut buf = Vec::new();
        write_samples_binary(&mut buf, &set).unwrap();
        assert_eq!(buf.len(), 8 + 8 + 8 + 4 + 4 + 16);
        assert_eq!(&buf[..8], b"QHDSAMP1");
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 1);
        assert_eq!(u64::from_le_bytes(buf[16..24].try_into().unwrap()), 7);
        assert_eq!(u32::from_le_bytes(buf[24..28].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[28..32].try_into().unwrap()), 0);
        assert_eq!(f64::from_le_bytes(buf[32..40].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(buf[40..48].try_into().unwrap()), -2.0);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let mut buf = Vec::new();
        write_samples_binary(
            &mut buf,
            &SampleSet::new(vec![QuadratureSample::new(1.0, 1.0); 3], SampleMeta::default()),
        )
        .unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_samples_binary(&buf[..]).is_err());
        assert!(read_samples_binary(&b"NOTMAGIC"[..]).is_err());
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1e0+2e0i").unwrap(), Complex64::new(1.0, 2.0));
        assert_eq!(parse_complex("-1.5e-3-2.5e-4i").unwrap(), Complex64::new(-1.5e-3, -2.5e-4));
        assert_eq!(parse_complex("0.5+0i").unwrap(), Complex64::new(0.5, 0.0));
        assert!(parse_complex("0.5").is_err());
        assert_eq!(format_complex(Complex64::new(0.25, -1.0)), "2.5e-1-1e0i");
    }

    #[test]
    fn density_round_trip_is_bit_exact() {
        let rho = apply_loss(
            &density_from_pure(&coherent_state(Complex64::new(0.7, -0.4), 6).unwrap()),
            0.83,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_density(&mut buf, &rho).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("DIM 6\n"));
        let back = read_density(&buf[..]).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn malformed_density_is_rejected() {
        assert!(read_density(&b"DIM 2\n1e0+0e0i,0e0+0e0i\n"[..]).is_err());
        assert!(read_density(&b"SIZE 1\n1e0+0e0i\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn complex_format_round_trips(re in proptest::num::f64::NORMAL | proptest::num::f64::ZERO,
                                      im in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            let z = Complex64::new(re, im);
            let back = parse_complex(&format_complex(z)).unwrap();
            prop_assert_eq!(back.re.to_bits(), re.to_bits());
            prop_assert_eq!(back.im.to_bits(), im.to_bits());
        }

        #[test]
        fn sample_files_round_trip(points in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 0..50),
                                   seed in any::<u64>(), generation in 0u32..10) {
            let set = SampleSet::new(
                points.iter().map(|&(x, y)| QuadratureSample::new(x, y)).collect(),
                SampleMeta { seed, generation, ..SampleMeta::default() },
            );
            let mut bin = Vec::new();
            write_samples_binary(&mut bin, &set).unwrap();
            let back = read_samples_binary(&bin[..]).unwrap();
            prop_assert_eq!(&back.samples, &set.samples);
            prop_assert_eq!(back.meta.seed, seed);
            prop_assert_eq!(back.meta.generation, generation);
            let mut csv = Vec::new();
            write_samples_csv(&mut csv, &set).unwrap();
            prop_assert_eq!(read_samples_csv(&csv[..]).unwrap().samples, set.samples);
        }
    }
}
