//! Replay buffer snapshots in the shared container format.

use std::path::Path;

use crate::container::{read_file, write_file, ContainerError, Reader, Writer};
use crate::Real;

use super::{ReplayBuffer, Result, Transition};

pub const REPLAY_MAGIC: &[u8; 8] = b"ACMBRPLY";

fn write_transition<T: Real>(w: &mut Writer, t: &Transition<T>) {
    w.u64(t.obs.len() as u64);
    w.f64s(t.obs.iter().map(|v| v.as_f64()));
    w.u64(t.next_obs.len() as u64);
    w.f64s(t.next_obs.iter().map(|v| v.as_f64()));
    w.f64s(
        t.goal
            .iter()
            .chain(&t.action)
            .chain(std::iter::once(&t.reward))
            .chain(&t.achieved)
            .chain(&t.achieved_next)
            .map(|v| v.as_f64()),
    );
    w.u8(u8::from(t.done) | (u8::from(t.wall_hit) << 1));
}

fn read_vec<T: Real>(r: &mut Reader<'_>) -> crate::container::Result<Vec<T>> {
    let n = r.count(8)?;
    (0..n).map(|_| r.f64().map(T::lit)).collect()
}

fn read_pair<T: Real>(r: &mut Reader<'_>) -> crate::container::Result<[T; 2]> {
    Ok([T::lit(r.f64()?), T::lit(r.f64()?)])
}

pub(crate) fn read_transition<T: Real>(r: &mut Reader<'_>) -> crate::container::Result<Transition<T>> {
    let obs = read_vec(r)?;
    let next_obs = read_vec(r)?;
    let goal = read_pair(r)?;
    let action = read_pair(r)?;
    let reward = T::lit(r.f64()?);
    let achieved = read_pair(r)?;
    let achieved_next = read_pair(r)?;
    let flags = r.u8()?;
    if flags > 3 {
        return Err(ContainerError::Corrupt(format!("bad transition flags {flags}")));
    }
    Ok(Transition {
        obs,
        goal,
        action,
        reward,
        next_obs,
        done: flags & 1 != 0,
        wall_hit: flags & 2 != 0,
        achieved,
        achieved_next,
    })
}

pub(crate) fn encode_transitions<'a, T: Real + 'a>(
    w: &mut Writer,
    items: impl ExactSizeIterator<Item = &'a Transition<T>>,
) {
    w.u64(items.len() as u64);
    for t in items {
        write_transition(w, t);
    }
}

pub(crate) fn decode_transitions<T: Real>(r: &mut Reader<'_>) -> crate::container::Result<Vec<Transition<T>>> {
    let n = r.count(8 * 11 + 1)?;
    (0..n).map(|_| read_transition(r)).collect()
}

impl<T: Real> ReplayBuffer<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.capacity as u64);
        w.u64(self.cursor as u64);
        encode_transitions(&mut w, self.storage.iter());
        w.finish(REPLAY_MAGIC)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::open(bytes, REPLAY_MAGIC)?;
        let capacity = r.u64()? as usize;
        let cursor = r.u64()? as usize;
        let storage = decode_transitions(&mut r)?;
        r.finish()?;
        if capacity == 0 || storage.len() > capacity || cursor >= capacity {
            return Err(ContainerError::Corrupt("inconsistent buffer header".into()).into());
        }
        Ok(Self::from_parts(capacity, storage, cursor))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(write_file(path.as_ref(), &self.to_bytes())?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_file(path.as_ref())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_transition() -> impl Strategy<Value = Transition<f64>> {
        (
            prop::collection::vec(-1.0f64..1.0, 0..16),
            prop::collection::vec(-1.0f64..1.0, 0..16),
            prop::array::uniform8(-1e4f64..1e4),
            any::<bool>(),
            any::<bool>(),
        )
            .prop_map(|(obs, next_obs, v, done, wall_hit)| Transition {
                obs,
                goal: [v[0], v[1]],
                action: [v[2] / 1e4, v[3] / 1e4],
                reward: v[4],
                next_obs,
                done,
                wall_hit,
                achieved: [v[5], v[6]],
                achieved_next: [v[7], v[0]],
            })
    }

    proptest! {
        #[test]
        fn snapshot_roundtrip(items in prop::collection::vec(arb_transition(), 0..40), cap in 1usize..50) {
            let mut b = ReplayBuffer::new(cap);
            for t in items {
                b.push(t);
            }
            let back = ReplayBuffer::<f64>::from_bytes(&b.to_bytes()).unwrap();
            prop_assert_eq!(back.capacity(), b.capacity());
            prop_assert_eq!(back.cursor(), b.cursor());
            prop_assert!(back.iter().eq(b.iter()));
        }
    }
}
