//! Logged episodes as JSON lines: a header line, then one episode per line.

use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::Trajectory;

pub const BUFFER_FORMAT: &str = "cfrl-replay";
pub const BUFFER_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferHeader {
    pub format: String,
    pub version: u32,
    /// Hash of the environment configuration every episode was collected in.
    pub env_hash: String,
    pub seed: u64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "S: Serialize, O: Serialize", deserialize = "S: DeserializeOwned, O: DeserializeOwned"))]
pub struct BufferEpisode<S, O> {
    pub behaviour: String,
    pub trajectory: Trajectory<S, O>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer<S, O> {
    pub env_hash: String,
    pub seed: u64,
    pub episodes: Vec<BufferEpisode<S, O>>,
}

impl<S: Serialize + DeserializeOwned + Clone, O: Serialize + DeserializeOwned + Clone> ReplayBuffer<S, O> {
    pub fn new(env_hash: impl Into<String>, seed: u64) -> Self {
        Self { env_hash: env_hash.into(), seed, episodes: vec![] }
    }

    pub fn push(&mut self, behaviour: impl Into<String>, trajectory: Trajectory<S, O>) -> Result<()> {
        if trajectory.logp.iter().any(|l| !l.is_finite()) {
            return Err(Error::Input("behaviour log-probabilities must be finite".into()));
        }
        self.episodes.push(BufferEpisode { behaviour: behaviour.into(), trajectory });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn trajectories(&self) -> Vec<Trajectory<S, O>> {
        self.episodes.iter().map(|e| e.trajectory.clone()).collect()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = BufferHeader {
            format: BUFFER_FORMAT.into(),
            version: BUFFER_VERSION,
            env_hash: self.env_hash.clone(),
            seed: self.seed,
            episodes: self.episodes.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for e in &self.episodes {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| Error::Parse { line: 1, msg: "empty replay buffer".into() })??;
        let header: BufferHeader =
            serde_json::from_str(&head).map_err(|e| Error::Parse { line: 1, msg: format!("bad header: {e}") })?;
        if header.format != BUFFER_FORMAT || header.version != BUFFER_VERSION {
            return Err(Error::Parse { line: 1, msg: format!("unsupported buffer {} v{}", header.format, header.version) });
        }
        let mut buf = Self::new(header.env_hash, header.seed);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: BufferEpisode<S, O> =
                serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
            buf.push(e.behaviour, e.trajectory).map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?;
        }
        if buf.len() != header.episodes {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header promises {} episodes, found {}", header.episodes, buf.len()),
            });
        }
        Ok(buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_empty_buffer() {
        let mut b: ReplayBuffer<usize, usize> = ReplayBuffer::new("abc", 7);
        let mut bytes = Vec::new();
        b.write_to(&mut bytes).unwrap();
        assert_eq!(ReplayBuffer::<usize, usize>::read_from(&bytes[..]).unwrap(), b);
        b.push(
            "uniform",
            Trajectory { states: vec![0, 1], obs: vec![1, 0], actions: vec![1], rewards: vec![0.5], logp: vec![-0.25] },
        )
        .unwrap();
        let mut bytes = Vec::new();
        b.write_to(&mut bytes).unwrap();
        assert_eq!(String::from_utf8(bytes.clone()).unwrap().lines().count(), 2);
        assert_eq!(ReplayBuffer::<usize, usize>::read_from(&bytes[..]).unwrap(), b);
    }

    #[test]
    fn rejects_infinite_log_probs() {
        let mut b: ReplayBuffer<usize, usize> = ReplayBuffer::new("", 0);
        let t = Trajectory {
            states: vec![0, 0],
            obs: vec![0, 0],
            actions: vec![0],
            rewards: vec![0.0],
            logp: vec![f64::NEG_INFINITY],
        };
        assert!(b.push("x", t).is_err());
    }
}
