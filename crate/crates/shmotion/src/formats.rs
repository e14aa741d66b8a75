//! Steering, geometry, trajectory and WAVE files.

use std::fmt::Write as _;
use std::io::BufReader;
use std::path::Path;

use shmotion_core::motion::{EulerAngles, FramePose, PoseConvention, Trajectory, TranslationVec};
use shmotion_core::sh::coeff_count;
use shmotion_core::steering::{ArrayGeometry, SteeringSet};
use shmotion_core::{CMatrix, Complex64};

use crate::error::{Error, Result};

const STEERING_MAGIC: &str = "shmotion-steering 1";

/// Writes a steering set as text.
///
/// ```text
/// shmotion-steering 1
/// mics 24
/// order 3
/// radius 0.06
/// fs 10000
/// speed_of_sound 343
/// frequencies 1000 2000
/// data
/// re,im,re,im,...      one row per (frequency, mic), frequency-major
/// ```
pub fn steering_to_string(set: &SteeringSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{STEERING_MAGIC}");
    let _ = writeln!(s, "mics {}", set.mic_count);
    let _ = writeln!(s, "order {}", set.order);
    let _ = writeln!(s, "radius {:e}", set.radius);
    let _ = writeln!(s, "fs {:e}", set.fs);
    let _ = writeln!(s, "speed_of_sound {:e}", set.speed_of_sound);
    s.push_str("frequencies");
    for f in &set.freqs {
        let _ = write!(s, " {f:e}");
    }
    s.push_str("\ndata\n");
    for m in &set.matrices {
        for row in m.row_iter() {
            let cells: Vec<String> = row.iter().map(|z| format!("{:e},{:e}", z.re, z.im)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
    }
    s
}

pub fn save_steering(path: &Path, set: &SteeringSet) -> Result<()> {
    std::fs::write(path, steering_to_string(set)).map_err(|e| Error::io(path, e))
}

pub fn load_steering(path: &Path) -> Result<SteeringSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_steering(&text, &path.display().to_string())
}

fn parse_num<T: std::str::FromStr>(tok: &str, origin: &str, line: usize, what: &str) -> Result<T> {
    tok.trim()
        .parse()
        .map_err(|_| Error::format(origin, line, format!("cannot parse {what} from {tok:?}")))
}

/// Parses the text form written by [`steering_to_string`]; `origin` labels
/// error locations.
pub fn parse_steering(text: &str, origin: &str) -> Result<SteeringSet> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut next = |what: &str| -> Result<(usize, &str)> {
        lines
            .by_ref()
            .find(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .ok_or_else(|| Error::format(origin, 0, format!("unexpected end of file, expected {what}")))
    };
    let (ln, magic) = next("header")?;
    if magic != STEERING_MAGIC {
        return Err(Error::format(origin, ln, format!("expected {STEERING_MAGIC:?}")));
    }
    let mut field = |key: &str| -> Result<(usize, String)> {
        let (ln, l) = next(key)?;
        match l.split_once(char::is_whitespace) {
            Some((k, v)) if k == key => Ok((ln, v.trim().to_string())),
            _ if l == key => Ok((ln, String::new())),
            _ => Err(Error::format(origin, ln, format!("expected field {key:?}"))),
        }
    };
    let (ln, v) = field("mics")?;
    let mics: usize = parse_num(&v, origin, ln, "mics")?;
    let (ln, v) = field("order")?;
    let order: u32 = parse_num(&v, origin, ln, "order")?;
    let (ln, v) = field("radius")?;
    let radius: f64 = parse_num(&v, origin, ln, "radius")?;
    let (ln, v) = field("fs")?;
    let fs: f64 = parse_num(&v, origin, ln, "fs")?;
    let (ln, v) = field("speed_of_sound")?;
    let c: f64 = parse_num(&v, origin, ln, "speed_of_sound")?;
    let (fln, v) = field("frequencies")?;
    let freqs = v
        .split_whitespace()
        .map(|t| parse_num::<f64>(t, origin, fln, "frequency"))
        .collect::<Result<Vec<_>>>()?;
    if freqs.is_empty() {
        return Err(Error::format(origin, fln, "empty frequency grid"));
    }
    if let Some(i) = freqs.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(Error::format(origin, fln, format!("frequency grid not increasing at entry {}", i + 1)));
    }
    if mics == 0 {
        return Err(Error::format(origin, 0, "mics must be at least 1"));
    }
    let (ln, d) = field("data")?;
    if !d.is_empty() {
        return Err(Error::format(origin, ln, "unexpected text after \"data\""));
    }
    let cols = coeff_count(order);
    let mut matrices = Vec::with_capacity(freqs.len());
    for _ in &freqs {
        let mut m = CMatrix::zeros(mics, cols);
        for q in 0..mics {
            let (ln, row) = next("a data row")?;
            let vals = row
                .split(',')
                .map(|t| parse_num::<f64>(t, origin, ln, "a matrix entry"))
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != 2 * cols {
                return Err(Error::format(
                    origin,
                    ln,
                    format!("{} values, expected {} ({cols} complex entries for order {order})", vals.len(), 2 * cols),
                ));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::format(origin, ln, "non-finite entry"));
            }
            for j in 0..cols {
                m[(q, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
            }
        }
        matrices.push(m);
    }
    if let Ok((ln, _)) = next("end of file") {
        return Err(Error::format(origin, ln, "more data rows than mics × frequencies"));
    }
    let mut set = SteeringSet::new(mics, order, radius, fs, freqs, matrices)
        .map_err(|e| Error::format(origin, 0, e.to_string()))?;
    set.speed_of_sound = c;
    Ok(set)
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?)
}

fn line_of(r: &csv::StringRecord) -> usize {
    r.position().map_or(0, |p| p.line() as usize)
}

fn expect_pair(rec: &csv::StringRecord, key: &str, origin: &str) -> Result<String> {
    if rec.len() == 2 && &rec[0] == key {
        Ok(rec[1].to_string())
    } else {
        Err(Error::format(origin, line_of(rec), format!("expected \"{key},<value>\"")))
    }
}

fn expect_header(rec: &csv::StringRecord, cols: &[&str], origin: &str) -> Result<()> {
    if rec.iter().eq(cols.iter().copied()) {
        Ok(())
    } else {
        Err(Error::format(origin, line_of(rec), format!("expected header {}", cols.join(","))))
    }
}

/// Reads a geometry CSV: a `radius,<m>` line, a `theta,phi` header, then one
/// row per microphone in radians.
pub fn load_geometry(path: &Path) -> Result<ArrayGeometry> {
    let origin = path.display().to_string();
    let mut rdr = csv_reader(path)?;
    let mut records = rdr.records();
    let mut next = |what: &str| -> Result<Option<csv::StringRecord>> {
        match records.next() {
            Some(r) => Ok(Some(r?)),
            None if what.is_empty() => Ok(None),
            None => Err(Error::format(&origin, 0, format!("missing {what}"))),
        }
    };
    let rec = next("radius line")?.unwrap_or_default();
    let radius: f64 = parse_num(&expect_pair(&rec, "radius", &origin)?, &origin, line_of(&rec), "radius")?;
    let rec = next("theta,phi header")?.unwrap_or_default();
    expect_header(&rec, &["theta", "phi"], &origin)?;
    let mut mics = Vec::new();
    while let Some(rec) = next("")? {
        let ln = line_of(&rec);
        if rec.len() != 2 {
            return Err(Error::format(&origin, ln, format!("{} columns, expected 2", rec.len())));
        }
        let theta: f64 = parse_num(&rec[0], &origin, ln, "theta")?;
        let phi: f64 = parse_num(&rec[1], &origin, ln, "phi")?;
        mics.push((theta, phi));
    }
    let label = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    ArrayGeometry::new(radius, mics, label).map_err(|e| Error::format(&origin, 0, e.to_string()))
}

pub fn save_geometry(path: &Path, geom: &ArrayGeometry) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    w.write_record(["radius", &format!("{:e}", geom.radius)])?;
    w.write_record(["theta", "phi"])?;
    for (t, p) in &geom.mics {
        w.write_record([format!("{t:e}"), format!("{p:e}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

const TRAJECTORY_COLUMNS: [&str; 7] = ["frame_index", "alpha", "beta", "gamma", "r", "theta", "phi"];

/// Reads a trajectory CSV: a `convention,absolute|delta` line, the column
/// header, then one row per frame starting at frame 0.
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let origin = path.display().to_string();
    let mut rdr = csv_reader(path)?;
    let mut records = rdr.records();
    let first = records
        .next()
        .ok_or_else(|| Error::format(&origin, 0, "empty trajectory file"))??;
    let convention = match expect_pair(&first, "convention", &origin)?.as_str() {
        "absolute" => PoseConvention::Absolute,
        "delta" => PoseConvention::Delta,
        other => {
            return Err(Error::format(
                &origin,
                line_of(&first),
                format!("convention must be absolute or delta, got {other:?}"),
            ))
        }
    };
    let header = records
        .next()
        .ok_or_else(|| Error::format(&origin, 0, "missing column header"))??;
    expect_header(&header, &TRAJECTORY_COLUMNS, &origin)?;
    let mut poses = Vec::new();
    for rec in records {
        let rec = rec?;
        let ln = line_of(&rec);
        if rec.len() != TRAJECTORY_COLUMNS.len() {
            return Err(Error::format(&origin, ln, format!("{} columns, expected 7", rec.len())));
        }
        let idx: usize = parse_num(&rec[0], &origin, ln, "frame_index")?;
        if idx != poses.len() {
            return Err(Error::format(&origin, ln, format!("frame_index {idx}, expected {}", poses.len())));
        }
        let v: Vec<f64> = (1..7)
            .map(|c| parse_num(&rec[c], &origin, ln, TRAJECTORY_COLUMNS[c]))
            .collect::<Result<_>>()?;
        let bad = |e: shmotion_core::Error| Error::format(&origin, ln, e.to_string());
        poses.push(FramePose {
            rotation: EulerAngles::new(v[0], v[1], v[2]).map_err(bad)?,
            translation: TranslationVec::new(v[3], v[4], v[5]).map_err(bad)?,
        });
    }
    Trajectory::new(poses, convention).map_err(|e| Error::format(&origin, 0, e.to_string()))
}

pub fn save_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_path(path)?;
    let conv = match traj.convention() {
        PoseConvention::Absolute => "absolute",
        PoseConvention::Delta => "delta",
    };
    w.write_record(["convention", conv])?;
    w.write_record(TRAJECTORY_COLUMNS)?;
    for (i, p) in traj.poses().iter().enumerate() {
        let r = p.rotation;
        let t = p.translation;
        w.write_record(
            std::iter::once(i.to_string())
                .chain([r.alpha, r.beta, r.gamma, t.r, t.theta, t.phi].iter().map(|v| format!("{v:e}"))),
        )?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Multichannel audio as `[channel][sample]` at `fs` Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Audio {
    pub fs: f64,
    pub channels: Vec<Vec<f64>>,
}

/// Reads 16/24/32-bit PCM or 32-bit float WAVE, scaling PCM to `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<Audio> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = hound::WavReader::new(BufReader::new(file))?;
    let spec = rdr.spec();
    let ch = spec.channels as usize;
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => rdr
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            rdr.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / ch.max(1)); ch];
    for frame in interleaved.chunks_exact(ch) {
        for (c, &v) in frame.iter().enumerate() {
            channels[c].push(v);
        }
    }
    Ok(Audio {
        fs: f64::from(spec.sample_rate),
        channels,
    })
}

/// Writes 32-bit float WAVE.
pub fn write_wav(path: &Path, audio: &Audio) -> Result<()> {
    let rate = audio.fs.round();
    if rate != audio.fs || !(1.0..=f64::from(u32::MAX)).contains(&rate) {
        return Err(Error::format(path.display(), 0, format!("WAVE needs an integer sample rate, got {}", audio.fs)));
    }
    let spec = hound::WavSpec {
        channels: audio.channels.len() as u16,
        sample_rate: rate as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec)?;
    let len = audio.channels.first().map_or(0, Vec::len);
    for i in 0..len {
        for c in &audio.channels {
            w.write_sample(c[i] as f32)?;
        }
    }
    w.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use shmotion_core::steering::{near_uniform, RigidSphere};

    fn sample_set() -> SteeringSet {
        let model = RigidSphere {
            geometry: near_uniform(4, 0.0625).unwrap(),
            speed_of_sound: 343.0,
        };
        SteeringSet::from_model(&model, 2, 10_000.0, vec![1000.0, 2500.0]).unwrap()
    }

    #[test]
    fn steering_round_trip_is_exact() {
        let set = sample_set();
        let back = parse_steering(&steering_to_string(&set), "mem").unwrap();
        assert_eq!(back, set);
    }

    #[test]
    fn steering_column_mismatch_is_located() {
        let text = steering_to_string(&sample_set());
        let mut lines: Vec<&str> = text.lines().collect();
        let bad = "1,0,2,0";
        lines[9] = bad;
        let err = parse_steering(&lines.join("\n"), "mem").unwrap_err();
        match err {
            Error::Format { line, .. } => assert_eq!(line, 10),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn steering_unsorted_grid_rejected() {
        let text = steering_to_string(&sample_set()).replace("frequencies 1e3 2.5e3", "frequencies 2.5e3 1e3");
        assert!(matches!(parse_steering(&text, "mem"), Err(Error::Format { .. })));
    }

    #[test]
    fn geometry_and_trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = near_uniform(12, 0.05).unwrap();
        let gp = dir.path().join("g.csv");
        save_geometry(&gp, &g).unwrap();
        let back = load_geometry(&gp).unwrap();
        assert_eq!(back.mics, g.mics);
        assert_eq!(back.radius, g.radius);

        let times: Vec<f64> = (0..5).map(|i| i as f64 * 0.0128).collect();
        let t = Trajectory::rotate_z(1.0, &times).unwrap();
        let tp = dir.path().join("t.csv");
        save_trajectory(&tp, &t).unwrap();
        assert_eq!(load_trajectory(&tp).unwrap(), t);
        assert!(std::fs::read_to_string(&tp).unwrap().starts_with("convention,absolute\n"));
    }

    #[test]
    fn trajectory_rejects_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(
            &p,
            "convention,delta\nframe_index,alpha,beta,gamma,r,theta,phi\n0,0,0,0,0,0,0\n2,0,0,0,0,0,0\n",
        )
        .unwrap();
        match load_trajectory(&p) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wav_round_trip_float_and_pcm() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let audio = Audio {
            fs: 10_000.0,
            channels: vec![vec![0.5, -0.25, 0.125], vec![0.0, 0.75, -1.0]],
        };
        write_wav(&p, &audio).unwrap();
        assert_eq!(read_wav(&p).unwrap(), audio);

        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 24,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(1i32 << 22).unwrap();
        w.finalize().unwrap();
        let a = read_wav(&p).unwrap();
        assert_eq!(a.fs, 8000.0);
        assert_eq!(a.channels, vec![vec![0.5]]);
    }
}
