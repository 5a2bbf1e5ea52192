//! On-disk dataset bundles and synthetic dataset generation.
//!
//! A bundle is a directory of tab-separated UTF-8 files:
//!
//! ```text
//! news_edges.tsv   src  dst          news-news propagation edges
//! user_edges.tsv   src  dst          user-user interaction edges
//! inter_edges.tsv  user news         posting edges
//! news_attrs.tsv   node v_1 .. v_dt  one row per news node
//! user_attrs.tsv   node v_1 .. v_du  one row per user
//! news_labels.tsv  node {0,1}        at least every source news node
//! news_roles.tsv   node {source,cascade}
//! meta.json        dims and counts
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Cascade posts take
//! the label of their cascade's source when loaded.

mod synth;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_layer, jaccard_filter_user_edges, DualLayerGraph, Label, NodeRole};
use crate::nn::DenseMatrix;

pub use synth::{generate_synthetic, random_dual_graph, synthesize, SynthConfig, SYNTH_FORMAT_VERSION};

pub const NEWS_EDGES: &str = "news_edges.tsv";
pub const USER_EDGES: &str = "user_edges.tsv";
pub const INTER_EDGES: &str = "inter_edges.tsv";
pub const NEWS_ATTRS: &str = "news_attrs.tsv";
pub const USER_ATTRS: &str = "user_attrs.tsv";
pub const NEWS_LABELS: &str = "news_labels.tsv";
pub const NEWS_ROLES: &str = "news_roles.tsv";
pub const META: &str = "meta.json";
pub const MANIFEST: &str = "manifest.json";

/// Dimensions and counts declared in `meta.json`. Edge counts are undirected
/// edges after deduplication and self-loop removal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub d_t: usize,
    pub d_u: usize,
    pub source_news: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub real_sources: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fake_sources: Option<usize>,
    pub cascade_posts: usize,
    pub users: usize,
    pub news_edges: usize,
    pub inter_edges: usize,
    pub user_edges: usize,
}

impl DatasetMeta {
    pub fn news_nodes(&self) -> usize {
        self.source_news + self.cascade_posts
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, 0, e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| Error::load(path, e.line(), e.to_string()))
    }

    /// Counts of an in-memory graph.
    pub fn of(graph: &DualLayerGraph) -> Self {
        let sources = graph.news.source_nodes();
        let fake = sources.iter().filter(|&&s| graph.news.labels[s] == Some(1)).count();
        Self {
            d_t: graph.news.attr_dim(),
            d_u: graph.users.attr_dim(),
            source_news: sources.len(),
            real_sources: Some(sources.len() - fake),
            fake_sources: Some(fake),
            cascade_posts: graph.news.node_count() - sources.len(),
            users: graph.users.node_count(),
            news_edges: graph.news.adjacency.edge_count(),
            inter_edges: graph.inter_edges().len(),
            user_edges: graph.users.adjacency.edge_count(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadOptions {
    /// Drop user-user edges whose closed-neighborhood Jaccard similarity is
    /// below this value.
    pub jaccard_threshold: Option<f64>,
}

struct Rows<'a> {
    file: &'a Path,
    text: String,
}

impl<'a> Rows<'a> {
    fn open(dir: &Path, name: &str, file: &'a Path) -> Result<Self> {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::load(file, 0, format!("cannot read: {e}")))?;
        Ok(Self { file, text })
    }

    /// `(1-based line number, fields)` of every non-blank, non-comment line.
    fn lines(&self) -> impl Iterator<Item = (usize, Vec<&str>)> {
        self.text.lines().enumerate().filter_map(|(i, line)| {
            let line = line.trim_end_matches('\r');
            (!line.trim().is_empty() && !line.starts_with('#')).then(|| (i + 1, line.split('\t').collect()))
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::load(self.file, line, message)
    }

    fn id(&self, line: usize, field: &str, bound: usize, what: &str) -> Result<usize> {
        let v: usize = field
            .trim()
            .parse()
            .map_err(|_| self.err(line, format!("{what} id {field:?} is not a non-negative integer")))?;
        if v >= bound {
            return Err(self.err(line, format!("{what} id {v} out of range (0..{bound})")));
        }
        Ok(v)
    }

    fn edges(&self, a: (usize, &str), b: (usize, &str)) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::new();
        for (line, f) in self.lines() {
            if f.len() != 2 {
                return Err(self.err(line, format!("expected 2 fields, found {}", f.len())));
            }
            out.push((self.id(line, f[0], a.0, a.1)?, self.id(line, f[1], b.0, b.1)?));
        }
        Ok(out)
    }

    fn attributes(&self, n: usize, d: usize, what: &str) -> Result<DenseMatrix<f64>> {
        let mut data = vec![0.0; n * d];
        let mut seen = vec![false; n];
        for (line, f) in self.lines() {
            if f.len() != d + 1 {
                return Err(self.err(line, format!("expected node id and {d} values, found {} fields", f.len())));
            }
            let id = self.id(line, f[0], n, what)?;
            if std::mem::replace(&mut seen[id], true) {
                return Err(self.err(line, format!("duplicate attributes for {what} {id}")));
            }
            for (k, raw) in f[1..].iter().enumerate() {
                let v: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| self.err(line, format!("value {raw:?} is not a number")))?;
                if !v.is_finite() {
                    return Err(self.err(line, format!("value {raw:?} is not finite")));
                }
                data[id * d + k] = v;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(self.err(0, format!("no attributes for {what} {missing}")));
        }
        DenseMatrix::from_vec(n, d, data)
    }
}

/// Loads and validates a bundle, propagating source labels to cascade posts.
pub fn load_dataset(dir: &Path) -> Result<DualLayerGraph> {
    load_dataset_with(dir, &LoadOptions::default())
}

pub fn load_dataset_with(dir: &Path, options: &LoadOptions) -> Result<DualLayerGraph> {
    let meta = DatasetMeta::read(&dir.join(META))?;
    let (nn, nu) = (meta.news_nodes(), meta.users);
    let path = |name: &str| dir.join(name);

    let p = path(NEWS_ROLES);
    let roles_file = Rows::open(dir, NEWS_ROLES, &p)?;
    let mut roles: Vec<Option<NodeRole>> = vec![None; nn];
    for (line, f) in roles_file.lines() {
        if f.len() != 2 {
            return Err(roles_file.err(line, format!("expected 2 fields, found {}", f.len())));
        }
        let id = roles_file.id(line, f[0], nn, "news")?;
        let role = match f[1].trim() {
            "source" => NodeRole::SourceNews,
            "cascade" => NodeRole::CascadePost,
            other => return Err(roles_file.err(line, format!("role {other:?} is neither source nor cascade"))),
        };
        if roles[id].replace(role).is_some() {
            return Err(roles_file.err(line, format!("duplicate role for news {id}")));
        }
    }
    let roles: Vec<NodeRole> = roles
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or_else(|| roles_file.err(0, format!("no role for news {i}"))))
        .collect::<Result<_>>()?;

    let p = path(NEWS_LABELS);
    let labels_file = Rows::open(dir, NEWS_LABELS, &p)?;
    let mut labels: Vec<Option<Label>> = vec![None; nn];
    for (line, f) in labels_file.lines() {
        if f.len() != 2 {
            return Err(labels_file.err(line, format!("expected 2 fields, found {}", f.len())));
        }
        let id = labels_file.id(line, f[0], nn, "news")?;
        let y = match f[1].trim() {
            "0" => 0,
            "1" => 1,
            other => return Err(labels_file.err(line, format!("label {other:?} is not 0 or 1"))),
        };
        if labels[id].replace(y).is_some() {
            return Err(labels_file.err(line, format!("duplicate label for news {id}")));
        }
    }

    let p = path(NEWS_ATTRS);
    let news_x = Rows::open(dir, NEWS_ATTRS, &p)?.attributes(nn, meta.d_t, "news")?;
    let p = path(USER_ATTRS);
    let user_x = Rows::open(dir, USER_ATTRS, &p)?.attributes(nu, meta.d_u, "user")?;
    let p = path(NEWS_EDGES);
    let news_edges = Rows::open(dir, NEWS_EDGES, &p)?.edges((nn, "news"), (nn, "news"))?;
    let p = path(USER_EDGES);
    let user_edges = Rows::open(dir, USER_EDGES, &p)?.edges((nu, "user"), (nu, "user"))?;
    let p = path(INTER_EDGES);
    let inter = Rows::open(dir, INTER_EDGES, &p)?.edges((nu, "user"), (nn, "news"))?;

    let news = build_layer(nn, &news_edges, news_x, Some(labels))?.with_roles(roles)?;
    let users = build_layer(nu, &user_edges, user_x, None)?;
    let graph = propagate_source_labels(DualLayerGraph::new(news, users, inter)?)?;

    let found = DatasetMeta::of(&graph);
    let mut expected = meta.clone();
    expected.real_sources = meta.real_sources.or(found.real_sources);
    expected.fake_sources = meta.fake_sources.or(found.fake_sources);
    if found != expected {
        return Err(Error::Data(format!(
            "{} declares {} but the files contain {}",
            dir.join(META).display(),
            serde_json::to_string(&expected)?,
            serde_json::to_string(&found)?
        )));
    }
    Ok(match options.jaccard_threshold {
        Some(t) => {
            let users = jaccard_filter_user_edges(&graph.users, t);
            DualLayerGraph::new(graph.news.clone(), users, graph.inter_edges().to_vec())?
        }
        None => graph,
    })
}

/// Labels every cascade post with its source's label. A post that already
/// carries a different label is an error, as is an unlabeled source.
pub fn propagate_source_labels(graph: DualLayerGraph) -> Result<DualLayerGraph> {
    let sources = graph.cascade_sources()?;
    let mut labels = graph.news.labels.clone();
    for (i, &s) in sources.iter().enumerate() {
        let y = graph.news.labels[s].ok_or_else(|| Error::Data(format!("source news {s} has no label")))?;
        match labels[i] {
            Some(own) if own != y => {
                return Err(Error::Data(format!("news {i} is labeled {own} but its source {s} is labeled {y}")));
            }
            _ => labels[i] = Some(y),
        }
    }
    let mut news = graph.news.clone();
    news.labels = labels;
    DualLayerGraph::new(news, graph.users.clone(), graph.inter_edges().to_vec())
}

fn write_edges(out: &mut String, edges: &[(usize, usize)]) {
    for &(a, b) in edges {
        let _ = writeln!(out, "{a}\t{b}");
    }
}

fn write_attrs(out: &mut String, x: &DenseMatrix<f64>) {
    for i in 0..x.rows() {
        let _ = write!(out, "{i}");
        for v in x.row(i) {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
}

/// Writes `graph` as a bundle (creating `dir`). Every news label is written.
pub fn write_dataset(dir: &Path, graph: &DualLayerGraph) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let files: HashMap<&str, String> = {
        let mut m = HashMap::new();
        let mut s = String::new();
        write_edges(&mut s, &graph.news.adjacency.edges());
        m.insert(NEWS_EDGES, s);
        let mut s = String::new();
        write_edges(&mut s, &graph.users.adjacency.edges());
        m.insert(USER_EDGES, s);
        let mut s = String::new();
        write_edges(&mut s, graph.inter_edges());
        m.insert(INTER_EDGES, s);
        let mut s = String::new();
        write_attrs(&mut s, &graph.news.attributes);
        m.insert(NEWS_ATTRS, s);
        let mut s = String::new();
        write_attrs(&mut s, &graph.users.attributes);
        m.insert(USER_ATTRS, s);
        let mut s = String::new();
        for (i, y) in graph.news.labels.iter().enumerate() {
            if let Some(y) = y {
                let _ = writeln!(s, "{i}\t{y}");
            }
        }
        m.insert(NEWS_LABELS, s);
        let mut s = String::new();
        for (i, r) in graph.news.roles.iter().enumerate() {
            let tag = match r {
                NodeRole::SourceNews => "source",
                NodeRole::CascadePost => "cascade",
                NodeRole::User => return Err(Error::Data(format!("news node {i} has the user role"))),
            };
            let _ = writeln!(s, "{i}\t{tag}");
        }
        m.insert(NEWS_ROLES, s);
        m.insert(META, serde_json::to_string_pretty(&DatasetMeta::of(graph))? + "\n");
        m
    };
    for (name, body) in files {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}
