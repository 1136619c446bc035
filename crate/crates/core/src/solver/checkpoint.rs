//! Plain-text checkpoint files: full state dump with time metadata.
//!
//! Format (line oriented):
//!
//!   checkpoint 1
//!   time <t>
//!   step <n>
//!   dofs <count>
//!   <x> <w>          (count lines, 17 significant digits)
//!   end

use super::State;
use crate::error::{io_err, Error, Result};
use std::path::Path;

pub fn write_checkpoint(state: &State, path: &Path) -> Result<()> {
    let mut s = String::new();
    s.push_str("checkpoint 1\n");
    s.push_str(&format!("time {:.17e}\n", state.t));
    s.push_str(&format!("step {}\n", state.step));
    s.push_str(&format!("dofs {}\n", state.x.len()));
    for (x, w) in state.x.iter().zip(&state.w) {
        s.push_str(&format!("{x:.17e} {w:.17e}\n"));
    }
    s.push_str("end\n");
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<State> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let origin = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let mut expect = |what: &str| -> Result<(usize, &str)> {
        lines.next().map(|(i, l)| (i + 1, l.trim())).ok_or_else(|| Error::Parse {
            path: origin.clone(),
            line: 0,
            message: format!("unexpected end of file, expected {what}"),
        })
    };
    let (ln, header) = expect("header")?;
    if header != "checkpoint 1" {
        return Err(Error::Parse {
            path: origin,
            line: ln,
            message: "expected 'checkpoint 1'".into(),
        });
    }
    let parse_kv = |line: (usize, &str), key: &str| -> Result<f64> {
        line.1
            .strip_prefix(key)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: line.0,
                message: format!("expected '{key} <value>'"),
            })
    };
    let t = parse_kv(expect("time")?, "time")?;
    let step = parse_kv(expect("step")?, "step")? as usize;
    let n = parse_kv(expect("dofs")?, "dofs")? as usize;
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for _ in 0..n {
        let (ln, l) = expect("dof values")?;
        let mut it = l.split_whitespace();
        let xv: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: ln,
                message: "bad dof line".into(),
            })?;
        let wv: f64 = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: ln,
                message: "bad dof line".into(),
            })?;
        x.push(xv);
        w.push(wv);
    }
    Ok(State { t, step, x, w })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_roundtrip_bitexact() {
        let state = State {
            t: 0.123456789012345678,
            step: 42,
            x: vec![1.0 / 3.0, -2.5e-17, 9.87e12],
            w: vec![0.0, 1.0 / 7.0, -1.0],
        };
        let dir = std::env::temp_dir().join("roughfsi_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.ckpt");
        write_checkpoint(&state, &path).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back.step, state.step);
        assert_eq!(back.t.to_bits(), state.t.to_bits());
        for (a, b) in state.x.iter().zip(&back.x) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in state.w.iter().zip(&back.w) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
