//! Synthetic dual-layer datasets with a planted credibility signal.
//!
//! Users split into a credible and a non-credible half, each partitioned
//! into groups of `user_group_size`; the user layer is a stochastic block
//! model over those groups (a group size of 0 makes each half one block). Each source news spawns a cascade tree
//! by uniform random parent attachment (parents limited to depth below
//! `cascade_depth`). Every cascade post is published by one user, drawn from
//! the community matching the cascade's label with probability
//! `posting_fidelity` (real news: credible users; fake news: the rest).
//!
//! Attributes are `offset * c + scale * (s * strength * u + (1 - strength) * e)`
//! with fixed orthonormal directions `c` and `u` per layer, `s = +1` for fake
//! news / non-credible users and `-1` otherwise, and standard normal noise
//! `e`. Scale and offset stand in for the norm and the shared direction of
//! pretrained text embeddings.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{write_dataset, MANIFEST};
use crate::error::{Error, Result};
use crate::graph::{build_layer, DualLayerGraph, Label, NodeRole, FAKE, REAL};
use crate::nn::DenseMatrix;

pub const SYNTH_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_source_news: usize,
    /// Share of source news labeled fake.
    pub fake_fraction: f64,
    pub cascade_depth: usize,
    /// Probability that a post replies to the source directly instead of a
    /// uniformly chosen cascade member.
    pub root_attachment: f64,
    /// Mean number of posts per cascade; sizes are uniform on
    /// `1 ..= 2 * mean - 1`.
    pub mean_cascade_fanout: f64,
    pub n_users: usize,
    pub n_credible_users: usize,
    /// Users per block; 0 puts each credibility class in a single block.
    pub user_group_size: usize,
    /// Expected neighbors of a user inside its own block.
    pub user_intra_degree: f64,
    /// Expected neighbors of a user outside its block.
    pub user_inter_degree: f64,
    pub attr_dim_news: usize,
    pub attr_dim_user: usize,
    pub news_signal_strength: f64,
    pub user_signal_strength: f64,
    pub posting_fidelity: f64,
    pub news_attr_scale: f64,
    pub user_attr_scale: f64,
    /// Length of the component shared by every news attribute vector.
    pub news_attr_offset: f64,
    /// Length of the component shared by every user attribute vector.
    pub user_attr_offset: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_source_news: 1000,
            fake_fraction: 0.5,
            cascade_depth: 3,
            root_attachment: 0.5,
            mean_cascade_fanout: 6.0,
            n_users: 2000,
            n_credible_users: 1000,
            user_group_size: 20,
            user_intra_degree: 15.0,
            user_inter_degree: 1.0,
            attr_dim_news: 32,
            attr_dim_user: 32,
            news_signal_strength: 0.3,
            user_signal_strength: 0.9,
            posting_fidelity: 0.95,
            news_attr_scale: 1.0,
            user_attr_scale: 3.0,
            news_attr_offset: 0.0,
            user_attr_offset: 3.0,
            seed: 0,
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    format_version: u32,
    generator: &'static str,
    config: &'a SynthConfig,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_source_news == 0 || self.n_users == 0 || self.attr_dim_news == 0 || self.attr_dim_user == 0 {
            return bad("source news, users and attribute dims must be positive".into());
        }
        if self.cascade_depth == 0 {
            return bad("cascade_depth must be positive".into());
        }
        if self.n_credible_users > self.n_users {
            return bad(format!("{} credible users out of only {}", self.n_credible_users, self.n_users));
        }
        if !(self.mean_cascade_fanout >= 1.0 && self.mean_cascade_fanout.is_finite()) {
            return bad(format!("mean_cascade_fanout {} must be at least 1", self.mean_cascade_fanout));
        }
        for (name, v) in [
            ("fake_fraction", self.fake_fraction),
            ("root_attachment", self.root_attachment),
            ("news_signal_strength", self.news_signal_strength),
            ("user_signal_strength", self.user_signal_strength),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} outside [0, 1]"));
            }
        }
        if !(0.5..=1.0).contains(&self.posting_fidelity) {
            return bad(format!("posting_fidelity {} outside [0.5, 1]", self.posting_fidelity));
        }
        for (name, v) in [("news_attr_scale", self.news_attr_scale), ("user_attr_scale", self.user_attr_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be finite and positive"));
            }
        }
        for (name, v) in [
            ("news_attr_offset", self.news_attr_offset),
            ("user_attr_offset", self.user_attr_offset),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be finite and non-negative"));
            }
        }
        if !(self.user_intra_degree >= 0.0 && self.user_inter_degree >= 0.0) {
            return bad("user degrees must be non-negative".into());
        }
        Ok(())
    }
}

fn unit_vector(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

struct AttributeModel {
    strength: f64,
    scale: f64,
    offset: f64,
}

fn planted_attributes(signs: &[f64], m: AttributeModel, d: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
    let dir = unit_vector(d, rng);
    let mut common = unit_vector(d, rng);
    // keep the shared direction free of label information
    let dot: f64 = common.iter().zip(&dir).map(|(a, b)| a * b).sum();
    common.iter_mut().zip(&dir).for_each(|(c, u)| *c -= dot * u);
    let norm = common.iter().map(|x| x * x).sum::<f64>().sqrt();
    common.iter_mut().for_each(|c| *c = if norm > 1e-12 { *c / norm } else { 0.0 });
    let mut data = Vec::with_capacity(signs.len() * d);
    for &s in signs {
        for (&u, &c) in dir.iter().zip(&common) {
            let noise: f64 = rng.sample(StandardNormal);
            data.push(m.offset * c + m.scale * (s * m.strength * u + (1.0 - m.strength) * noise));
        }
    }
    DenseMatrix::from_vec(signs.len(), d, data).expect("sized by construction")
}

fn edge_probability(expected_degree: f64, candidates: usize) -> f64 {
    if candidates == 0 {
        0.0
    } else {
        (expected_degree / candidates as f64).min(1.0)
    }
}

/// Builds a synthetic graph in memory. Same config, same graph.
pub fn synthesize(config: &SynthConfig) -> Result<DualLayerGraph> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let s = config.n_source_news;

    let n_fake = (config.fake_fraction * s as f64).round() as usize;
    let mut order: Vec<usize> = (0..s).collect();
    order.shuffle(&mut rng);
    let mut source_label = vec![REAL; s];
    for &i in &order[..n_fake] {
        source_label[i] = FAKE;
    }

    let mut labels: Vec<Label> = source_label.clone();
    let mut roles = vec![NodeRole::SourceNews; s];
    let mut news_edges = Vec::new();
    let max_posts = ((2.0 * config.mean_cascade_fanout).round() as usize).saturating_sub(1).max(1);
    for (src, &label) in source_label.iter().enumerate() {
        let posts = rng.gen_range(1..=max_posts);
        // (node, depth) of every cascade member that may still take children
        let mut open = vec![src];
        let mut depth_of = vec![0usize];
        for _ in 0..posts {
            let k = if rng.gen_bool(config.root_attachment) {
                0
            } else {
                rng.gen_range(0..open.len())
            };
            let (parent, depth) = (open[k], depth_of[k] + 1);
            let node = labels.len();
            labels.push(label);
            roles.push(NodeRole::CascadePost);
            news_edges.push((parent, node));
            if depth < config.cascade_depth {
                open.push(node);
                depth_of.push(depth);
            }
        }
    }
    let nn = labels.len();

    let nu = config.n_users;
    let nc = config.n_credible_users;
    let community = |u: usize| usize::from(u >= nc);
    let sizes = [nc, nu - nc];
    let block_len = |c: usize| {
        if config.user_group_size == 0 {
            sizes[c].max(1)
        } else {
            config.user_group_size
        }
    };
    let credible_blocks = nc.div_ceil(block_len(0));
    let block = |u: usize| {
        if u < nc {
            u / block_len(0)
        } else {
            credible_blocks + (u - nc) / block_len(1)
        }
    };
    let mut block_size = vec![0usize; block(nu - 1) + 1];
    for u in 0..nu {
        block_size[block(u)] += 1;
    }
    let mut user_edges = Vec::new();
    for u in 0..nu {
        let (b, size) = (block(u), block_size[block(u)]);
        let p_in = edge_probability(config.user_intra_degree, size - 1);
        let p_out = edge_probability(config.user_inter_degree, nu - size);
        for v in u + 1..nu {
            let p = if block(v) == b { p_in } else { p_out };
            if p > 0.0 && rng.gen_bool(p) {
                user_edges.push((u, v));
            }
        }
    }

    let mut inter = Vec::with_capacity(nn - s);
    for (t, &y) in labels.iter().enumerate().skip(s) {
        let wanted = usize::from(y == FAKE);
        let mut c = if rng.gen_bool(config.posting_fidelity) {
            wanted
        } else {
            1 - wanted
        };
        if sizes[c] == 0 {
            c = 1 - c;
        }
        let offset = if c == 0 { 0 } else { nc };
        inter.push((offset + rng.gen_range(0..sizes[c]), t));
    }

    let news_signs: Vec<f64> = labels.iter().map(|&y| if y == FAKE { 1.0 } else { -1.0 }).collect();
    let news_model = AttributeModel {
        strength: config.news_signal_strength,
        scale: config.news_attr_scale,
        offset: config.news_attr_offset,
    };
    let news_x = planted_attributes(&news_signs, news_model, config.attr_dim_news, &mut rng);
    let user_signs: Vec<f64> = (0..nu).map(|u| if community(u) == 1 { 1.0 } else { -1.0 }).collect();
    let user_model = AttributeModel {
        strength: config.user_signal_strength,
        scale: config.user_attr_scale,
        offset: config.user_attr_offset,
    };
    let user_x = planted_attributes(&user_signs, user_model, config.attr_dim_user, &mut rng);

    let news = build_layer(nn, &news_edges, news_x, Some(labels.into_iter().map(Some).collect()))?.with_roles(roles)?;
    let users = build_layer(nu, &user_edges, user_x, None)?;
    DualLayerGraph::new(news, users, inter)
}

/// Small unstructured dual graph for numerical checks: roughly a quarter of
/// the news are sources, every other news node hangs off a random earlier
/// node, users form an Erdos-Renyi graph with edge probability 0.3, each
/// cascade post has one or two posting users and all attributes are
/// standard normal.
pub fn random_dual_graph(n_news: usize, n_users: usize, dim: usize, seed: u64) -> Result<DualLayerGraph> {
    if n_news < 2 || n_users == 0 || dim == 0 {
        return Err(Error::Config("random_dual_graph needs at least 2 news, 1 user and dim 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = (n_news / 4).max(2).min(n_news);
    let mut labels: Vec<Label> = (0..sources).map(|s| (s % 2) as Label).collect();
    let mut roles = vec![NodeRole::SourceNews; sources];
    let mut news_edges = Vec::new();
    for i in sources..n_news {
        let parent = rng.gen_range(0..i);
        labels.push(labels[parent]);
        roles.push(NodeRole::CascadePost);
        news_edges.push((parent, i));
    }
    let mut user_edges = Vec::new();
    for u in 0..n_users {
        for v in u + 1..n_users {
            if rng.gen_bool(0.3) {
                user_edges.push((u, v));
            }
        }
    }
    let mut inter = Vec::new();
    for t in sources..n_news {
        let k = rng.gen_range(1..=2.min(n_users));
        for u in rand::seq::index::sample(&mut rng, n_users, k) {
            inter.push((u, t));
        }
    }
    let mut normal = |rows: usize| {
        let data = (0..rows * dim).map(|_| rng.sample(StandardNormal)).collect();
        DenseMatrix::from_vec(rows, dim, data).expect("sized by construction")
    };
    let news_x = normal(n_news);
    let user_x = normal(n_users);
    let news = build_layer(n_news, &news_edges, news_x, Some(labels.into_iter().map(Some).collect()))?.with_roles(roles)?;
    let users = build_layer(n_users, &user_edges, user_x, None)?;
    DualLayerGraph::new(news, users, inter)
}

/// Synthesizes a graph and writes it to `dir` together with `manifest.json`.
pub fn generate_synthetic(config: &SynthConfig, dir: &Path) -> Result<DualLayerGraph> {
    let graph = synthesize(config)?;
    write_dataset(dir, &graph)?;
    let manifest = Manifest {
        format_version: SYNTH_FORMAT_VERSION,
        generator: "defake synth",
        config,
    };
    std::fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(graph)
}
