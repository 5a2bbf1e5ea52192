use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Label;

pub const MIN_SPLIT_NODES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    /// Number of repeated splits, each drawn with its own stream.
    pub folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            val: 0.1,
            test: 0.2,
            folds: 5,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [("train", self.train), ("val", self.val), ("test", self.test)] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} fraction {f} outside [0, 1]")));
            }
        }
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split fractions sum to {sum}, not 1")));
        }
        if self.folds == 0 {
            return Err(Error::Config("fold count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class part sizes: every entry is the floor or ceiling of its class
/// share, rows sum to the class sizes and, when a feasible rounding exists,
/// columns sum to `totals`. Extras are placed by a small max-flow.
fn allocate(class_sizes: &[usize], fractions: [f64; 3], totals: [usize; 3]) -> Vec<[usize; 3]> {
    let k = class_sizes.len();
    let mut alloc: Vec<[usize; 3]> = Vec::with_capacity(k);
    let mut extra_row = Vec::with_capacity(k);
    let mut open = vec![[false; 3]; k];
    for (c, &n) in class_sizes.iter().enumerate() {
        let quota = fractions.map(|f| f * n as f64);
        let floors = quota.map(|q| (q + 1e-9).floor() as usize);
        for p in 0..3 {
            open[c][p] = quota[p] - floors[p] as f64 > 1e-9;
        }
        extra_row.push(n - floors.iter().sum::<usize>());
        alloc.push(floors);
    }
    let mut extra_col: [isize; 3] = [0; 3];
    for p in 0..3 {
        extra_col[p] = totals[p] as isize - alloc.iter().map(|a| a[p] as isize).sum::<isize>();
    }

    // source -> class (extra_row) -> part (1 if fractional) -> sink (extra_col)
    let mut flow = vec![[false; 3]; k];
    let mut row_left = extra_row.clone();
    let mut col_left = extra_col.map(|e| e.max(0) as usize);
    fn augment(c: usize, flow: &mut [[bool; 3]], open: &[[bool; 3]], col_left: &mut [usize; 3], seen: &mut [bool]) -> bool {
        for p in 0..3 {
            if !open[c][p] || flow[c][p] {
                continue;
            }
            if col_left[p] > 0 {
                col_left[p] -= 1;
                flow[c][p] = true;
                return true;
            }
            // reroute another class's extra away from part p
            for c2 in 0..flow.len() {
                if c2 != c && flow[c2][p] && !seen[c2] {
                    seen[c2] = true;
                    if augment(c2, flow, open, col_left, seen) {
                        flow[c2][p] = false;
                        flow[c][p] = true;
                        return true;
                    }
                }
            }
        }
        false
    }
    let mut feasible = extra_col.iter().all(|&e| e >= 0);
    for c in 0..k {
        while feasible && row_left[c] > 0 {
            let mut seen = vec![false; k];
            seen[c] = true;
            if augment(c, &mut flow, &open, &mut col_left, &mut seen) {
                row_left[c] -= 1;
            } else {
                feasible = false;
            }
        }
    }
    if !feasible {
        // column totals out of reach: round each class on its own
        for c in 0..k {
            let n = class_sizes[c] as f64;
            let mut order: Vec<usize> = (0..3).filter(|&p| open[c][p]).collect();
            order.sort_by(|&a, &b| {
                let ra = fractions[a] * n - alloc[c][a] as f64;
                let rb = fractions[b] * n - alloc[c][b] as f64;
                rb.total_cmp(&ra).then(a.cmp(&b))
            });
            flow[c] = [false; 3];
            for &p in order.iter().take(extra_row[c]) {
                flow[c][p] = true;
            }
        }
    }
    for c in 0..k {
        for p in 0..3 {
            alloc[c][p] += usize::from(flow[c][p]);
        }
    }
    alloc
}

/// Stratified split of `ids` (with parallel `labels`) for one fold.
///
/// Every class contributes the floor or ceiling of its share to each part,
/// and the parts hold `round(train * n)`, `round((train + val) * n) -
/// round(train * n)` and the remainder whenever that is reachable. Output
/// id lists are sorted.
pub fn split_nodes(ids: &[usize], labels: &[Label], spec: &SplitSpec, fold: usize) -> Result<Split> {
    spec.validate()?;
    if ids.len() != labels.len() {
        return Err(Error::dim("split_nodes", format!("{} ids with {} labels", ids.len(), labels.len())));
    }
    if ids.len() < MIN_SPLIT_NODES {
        return Err(Error::Data(format!(
            "{} labeled source news cannot be split; at least {MIN_SPLIT_NODES} are needed",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(fold as u64);

    let mut classes: Vec<Label> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|&class| {
            let mut m: Vec<usize> = ids.iter().zip(labels).filter(|&(_, &y)| y == class).map(|(&i, _)| i).collect();
            m.sort_unstable();
            m.shuffle(&mut rng);
            m
        })
        .collect();

    let n = ids.len() as f64;
    let n_train = (spec.train * n).round() as usize;
    let n_head = (((spec.train + spec.val) * n).round() as usize).clamp(n_train, ids.len());
    let totals = [n_train, n_head - n_train, ids.len() - n_head];
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let alloc = allocate(&sizes, [spec.train, spec.val, spec.test], totals);

    let mut split = Split::default();
    for (m, a) in members.iter().zip(&alloc) {
        split.train.extend_from_slice(&m[..a[0]]);
        split.val.extend_from_slice(&m[a[0]..a[0] + a[1]]);
        split.test.extend_from_slice(&m[a[0] + a[1]..]);
    }
    for part in [&mut split.train, &mut split.val, &mut split.test] {
        part.sort_unstable();
    }

    let missing = |p: usize| alloc.iter().any(|a| a[p] == 0);
    if !split.train.is_empty() && missing(0) {
        return Err(Error::Data(format!(
            "fold {fold}: the training split misses a class; use more labeled source news"
        )));
    }
    for (p, name) in [(1, "validation"), (2, "test")] {
        let part = if p == 1 { &split.val } else { &split.test };
        if part.is_empty() {
            log::warn!("fold {fold}: {name} split is empty");
        } else if missing(p) {
            log::warn!("fold {fold}: {name} split misses a class");
        }
    }
    Ok(split)
}
