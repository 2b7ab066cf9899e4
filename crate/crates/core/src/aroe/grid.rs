//! Truncated information-state grid: arms observed within the last `tau0`
//! steps keep their exact `(s, τ)`, older arms collapse to a stationary slot.

use serde::{Deserialize, Serialize};

use crate::belief::InformationState;
use crate::error::{Error, Result};

pub const DEFAULT_GRID_CAP: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    Observed { state: u32, tau: u32 },
    Mixed,
}

impl Slot {
    pub fn tau(&self) -> Option<u32> {
        match self {
            Slot::Observed { tau, .. } => Some(*tau),
            Slot::Mixed => None,
        }
    }
}

/// Slots of an information state with taus beyond `tau0` marked as mixed.
pub fn snap_slots(info: &InformationState, tau0: u32) -> Vec<Slot> {
    info.s
        .iter()
        .zip(&info.tau)
        .map(|(&s, &t)| {
            if t <= tau0 as u64 {
                Slot::Observed { state: s as u32, tau: t as u32 }
            } else {
                Slot::Mixed
            }
        })
        .collect()
}

/// Exact slots (no truncation).
pub fn info_slots(info: &InformationState) -> Vec<Slot> {
    info.s
        .iter()
        .zip(&info.tau)
        .map(|(&s, &t)| Slot::Observed { state: s as u32, tau: t.min(u32::MAX as u64) as u32 })
        .collect()
}

/// Successor slots after playing `u` and observing `y`; `closure` truncates
/// taus past it into the mixed slot.
pub fn advance_slots(slots: &[Slot], u: usize, y: usize, closure: Option<u32>) -> Vec<Slot> {
    slots
        .iter()
        .enumerate()
        .map(|(k, slot)| {
            if k == u {
                return Slot::Observed { state: y as u32, tau: 1 };
            }
            match *slot {
                Slot::Observed { state, tau } => match closure {
                    Some(c) if tau + 1 > c => Slot::Mixed,
                    _ => Slot::Observed { state, tau: tau + 1 },
                },
                Slot::Mixed => Slot::Mixed,
            }
        })
        .collect()
}

/// Observed taus are distinct and one of them equals 1.
pub fn slots_reachable(slots: &[Slot]) -> bool {
    let mut taus: Vec<u32> = slots.iter().filter_map(|s| s.tau()).collect();
    taus.sort_unstable();
    taus.first() == Some(&1) && taus.windows(2).all(|w| w[0] != w[1])
}

#[derive(Debug, Clone)]
pub struct BeliefGrid {
    tau0: u32,
    sizes: Vec<usize>,
    points: Vec<Vec<Slot>>,
    radix: Vec<usize>,
    lookup: Vec<u32>,
    succ: Vec<u32>,
    arm_offset: Vec<usize>,
    stride: usize,
}

impl BeliefGrid {
    pub fn build(sizes: &[usize], tau0: u32) -> Result<Self> {
        Self::build_capped(sizes, tau0, DEFAULT_GRID_CAP)
    }

    pub fn build_capped(sizes: &[usize], tau0: u32, cap: usize) -> Result<Self> {
        if tau0 == 0 {
            return Err(Error::Config("tau0 must be at least 1".into()));
        }
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Domain("every arm needs at least one state".into()));
        }
        let radix: Vec<usize> = sizes.iter().map(|&n| n * tau0 as usize + 1).collect();
        let total = radix
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r))
            .filter(|&t| t <= cap)
            .ok_or(Error::GridTooLarge {
                size: radix.iter().fold(1usize, |a, &r| a.saturating_mul(r)),
                cap,
            })?;
        let mut lookup = vec![u32::MAX; total];
        let mut points = Vec::new();
        let mut digits = vec![0usize; sizes.len()];
        for (code, entry) in lookup.iter_mut().enumerate() {
            let mut rem = code;
            for k in (0..sizes.len()).rev() {
                digits[k] = rem % radix[k];
                rem /= radix[k];
            }
            let slots: Vec<Slot> = digits
                .iter()
                .zip(sizes)
                .map(|(&d, &n)| decode_slot(d, n, tau0))
                .collect();
            if slots_reachable(&slots) {
                *entry = points.len() as u32;
                points.push(slots);
            }
        }
        let stride: usize = sizes.iter().sum();
        let mut arm_offset = Vec::with_capacity(sizes.len());
        let mut acc = 0;
        for &n in sizes {
            arm_offset.push(acc);
            acc += n;
        }
        let mut grid = BeliefGrid {
            tau0,
            sizes: sizes.to_vec(),
            points,
            radix,
            lookup,
            succ: Vec::new(),
            arm_offset,
            stride,
        };
        let mut succ = vec![0u32; grid.points.len() * stride];
        for (p, slots) in grid.points.iter().enumerate() {
            for (u, &n) in sizes.iter().enumerate() {
                for y in 0..n {
                    let next = advance_slots(slots, u, y, Some(tau0));
                    let idx = grid.index_of_slots(&next).expect("grid closed under successors");
                    succ[p * stride + grid.arm_offset[u] + y] = idx as u32;
                }
            }
        }
        grid.succ = succ;
        Ok(grid)
    }

    pub fn tau0(&self) -> u32 {
        self.tau0
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<Slot>] {
        &self.points
    }

    pub fn point(&self, p: usize) -> &[Slot] {
        &self.points[p]
    }

    /// Lexicographically first point, where h is pinned to zero.
    pub fn reference(&self) -> usize {
        0
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn arm_offset(&self, u: usize) -> usize {
        self.arm_offset[u]
    }

    pub fn successor(&self, p: usize, u: usize, y: usize) -> usize {
        self.succ[p * self.stride + self.arm_offset[u] + y] as usize
    }

    pub fn successors(&self) -> &[u32] {
        &self.succ
    }

    fn encode(&self, k: usize, slot: Slot) -> Option<usize> {
        match slot {
            Slot::Observed { state, tau } => {
                if tau == 0 || tau > self.tau0 || state as usize >= self.sizes[k] {
                    None
                } else {
                    Some((tau as usize - 1) * self.sizes[k] + state as usize)
                }
            }
            Slot::Mixed => Some(self.sizes[k] * self.tau0 as usize),
        }
    }

    pub fn index_of_slots(&self, slots: &[Slot]) -> Option<usize> {
        if slots.len() != self.sizes.len() {
            return None;
        }
        let mut code = 0usize;
        for (k, &slot) in slots.iter().enumerate() {
            code = code * self.radix[k] + self.encode(k, slot)?;
        }
        match self.lookup[code] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    /// Grid point of an information state, snapping taus past `tau0`.
    pub fn index_of(&self, info: &InformationState) -> Option<usize> {
        if info.k() != self.sizes.len() {
            return None;
        }
        let mut code = 0usize;
        for k in 0..self.sizes.len() {
            let t = info.tau[k];
            let d = if t <= self.tau0 as u64 {
                if t == 0 || info.s[k] >= self.sizes[k] {
                    return None;
                }
                (t as usize - 1) * self.sizes[k] + info.s[k]
            } else {
                self.sizes[k] * self.tau0 as usize
            };
            code = code * self.radix[k] + d;
        }
        match self.lookup[code] {
            u32::MAX => None,
            i => Some(i as usize),
        }
    }

    /// True when the state needs no snapping.
    pub fn is_exact(&self, info: &InformationState) -> bool {
        info.tau.iter().all(|&t| t <= self.tau0 as u64)
    }

    pub fn is_singleton(&self, p: usize) -> bool {
        self.points[p].iter().all(|s| matches!(s, Slot::Observed { .. }))
    }

    pub fn point_info(&self, p: usize) -> Option<InformationState> {
        let mut s = Vec::with_capacity(self.k());
        let mut tau = Vec::with_capacity(self.k());
        for slot in &self.points[p] {
            match *slot {
                Slot::Observed { state, tau: t } => {
                    s.push(state as usize);
                    tau.push(t as u64);
                }
                Slot::Mixed => return None,
            }
        }
        Some(InformationState { s, tau })
    }

    pub fn mixed_arms(&self, p: usize) -> Vec<usize> {
        self.points[p]
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Slot::Mixed))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn describe(&self, p: usize) -> String {
        self.points[p]
            .iter()
            .enumerate()
            .map(|(k, s)| match s {
                Slot::Observed { state, tau } => format!("{k}:s{state}t{tau}"),
                Slot::Mixed => format!("{k}:mix"),
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

fn decode_slot(d: usize, n: usize, tau0: u32) -> Slot {
    if d == n * tau0 as usize {
        Slot::Mixed
    } else {
        Slot::Observed { state: (d % n) as u32, tau: (d / n) as u32 + 1 }
    }
}
