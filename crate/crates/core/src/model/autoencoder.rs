use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::block::ResidualBlock;
use super::latent::LatentCode;
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::layers::{features_to_tensor, tensor_to_features};
use crate::mesh::VertexFeatures;
use crate::sampling::{SamplingHierarchy, SamplingMap};

/// Basis size per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BasisPlan {
    /// Rounded mean neighborhood size of each block's map.
    Auto,
    /// One value for every block.
    Uniform(usize),
    /// Encoder blocks first, then decoder blocks.
    PerBlock(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// `c₀ → c₁ → … → c_D` through the encoder, then back to `c_{2D} = c₀`.
    pub channels: Vec<usize>,
    pub basis: BasisPlan,
    pub residual: bool,
    pub normalize_basis: bool,
    /// Seed for parameter initialization.
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(channels: Vec<usize>) -> Self {
        ModelConfig {
            channels,
            basis: BasisPlan::Auto,
            residual: true,
            normalize_basis: false,
            seed: 0,
        }
    }
}

/// `round(mean Eᵢ)`, at least 1.
pub fn auto_basis_size(map: &SamplingMap) -> usize {
    (map.mean_neighbors().round() as usize).max(1)
}

/// Parameter breakdown of one layer for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerCount {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub basis_size: Option<usize>,
    pub total_neighbors: usize,
    pub count: usize,
}

/// Block structure of the autoencoder; parameters live in a separate store.
#[derive(Debug, Clone)]
pub struct Network {
    pub hierarchy: SamplingHierarchy,
    pub fingerprint: u64,
    pub channels: Vec<usize>,
    pub basis_sizes: Vec<usize>,
    pub residual: bool,
    pub normalize_basis: bool,
    pub encoder: Vec<ResidualBlock>,
    pub decoder: Vec<ResidualBlock>,
}

#[derive(Debug, Clone)]
pub struct AutoencoderModel {
    pub net: Network,
    pub params: ParamStore,
}

/// Mirrored encoder/decoder of residual blocks over `hierarchy`. Encoder block
/// `k` uses level `k`'s down map; decoder blocks walk the up maps back from the
/// coarsest level. The last decoder block has a linear main path.
pub fn build_autoencoder(hierarchy: &SamplingHierarchy, config: &ModelConfig) -> Result<AutoencoderModel> {
    let depth = hierarchy.depth();
    let ch = &config.channels;
    if ch.len() != 2 * depth + 1 {
        return Err(Error::Config(format!(
            "channel plan has {} entries; a depth-{depth} hierarchy needs {}",
            ch.len(),
            2 * depth + 1
        )));
    }
    if ch.contains(&0) {
        return Err(Error::Config("channel counts must be positive".into()));
    }
    if ch[0] != ch[2 * depth] {
        return Err(Error::Config(format!(
            "decoder output channels {} differ from input channels {}",
            ch[2 * depth],
            ch[0]
        )));
    }
    let maps: Vec<SamplingMap> = hierarchy
        .levels
        .iter()
        .map(|l| l.down.clone())
        .chain(hierarchy.levels.iter().rev().map(|l| l.up.clone()))
        .collect();
    let basis_sizes: Vec<usize> = match &config.basis {
        BasisPlan::Auto => maps.iter().map(auto_basis_size).collect(),
        BasisPlan::Uniform(m) => vec![*m; maps.len()],
        BasisPlan::PerBlock(v) => {
            if v.len() != maps.len() {
                return Err(Error::Config(format!(
                    "basis plan has {} entries for {} blocks",
                    v.len(),
                    maps.len()
                )));
            }
            v.clone()
        }
    };
    if basis_sizes.contains(&0) {
        return Err(Error::Config("basis size M must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ParamStore::new();
    let mut blocks = Vec::with_capacity(maps.len());
    for (k, map) in maps.into_iter().enumerate() {
        let name = if k < depth {
            format!("enc{k}")
        } else {
            format!("dec{}", k - depth)
        };
        let last = k == 2 * depth - 1;
        blocks.push(ResidualBlock::new(
            &mut params,
            &name,
            map,
            ch[k],
            ch[k + 1],
            basis_sizes[k],
            config.residual,
            config.normalize_basis,
            !last,
            &mut rng,
        )?);
    }
    let decoder = blocks.split_off(depth);
    Ok(AutoencoderModel {
        net: Network {
            hierarchy: hierarchy.clone(),
            fingerprint: hierarchy.fingerprint(),
            channels: ch.clone(),
            basis_sizes,
            residual: config.residual,
            normalize_basis: config.normalize_basis,
            encoder: blocks,
            decoder,
        },
        params,
    })
}

impl Network {
    pub fn depth(&self) -> usize {
        self.hierarchy.depth()
    }

    pub fn input_channels(&self) -> usize {
        self.channels[0]
    }

    pub fn base_vertices(&self) -> usize {
        self.hierarchy.base.num_vertices()
    }

    /// `(latent vertices, latent channels)`.
    pub fn latent_shape(&self) -> (usize, usize) {
        (self.hierarchy.latent_vertices(), self.channels[self.depth()])
    }

    pub fn blocks(&self) -> impl Iterator<Item = &ResidualBlock> {
        self.encoder.iter().chain(&self.decoder)
    }

    pub fn param_count(&self) -> usize {
        self.blocks().map(ResidualBlock::param_count).sum()
    }

    pub fn config(&self, seed: u64) -> ModelConfig {
        ModelConfig {
            channels: self.channels.clone(),
            basis: BasisPlan::PerBlock(self.basis_sizes.clone()),
            residual: self.residual,
            normalize_basis: self.normalize_basis,
            seed,
        }
    }

    pub fn layer_counts(&self) -> Vec<LayerCount> {
        let mut out = Vec::new();
        let depth = self.depth();
        for (k, b) in self.blocks().enumerate() {
            let tag = if k < depth {
                format!("enc{k}")
            } else {
                format!("dec{}", k - depth)
            };
            let kind = if k < depth { "vcConv" } else { "vcTransConv" };
            out.push(LayerCount {
                name: format!("{tag}.{kind}"),
                in_channels: b.conv.in_channels,
                out_channels: b.conv.out_channels,
                basis_size: Some(b.conv.basis_size),
                total_neighbors: b.conv.map.total_neighbors(),
                count: b.conv.param_count(),
            });
            if let Some(r) = &b.residual {
                let kind = if k < depth { "vdDownRes" } else { "vdUpRes" };
                out.push(LayerCount {
                    name: format!("{tag}.{kind}"),
                    in_channels: r.in_channels,
                    out_channels: r.out_channels,
                    basis_size: None,
                    total_neighbors: r.vd.map.total_neighbors(),
                    count: r.param_count(),
                });
            }
        }
        out
    }

    /// `x` is `[batch · N_base, c₀]`; returns `[batch · N_latent, c_D]`.
    pub fn encode_var(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        self.encoder.iter().try_fold(x, |h, b| b.forward(tape, store, h))
    }

    pub fn decode_var(&self, tape: &mut Tape, store: &ParamStore, z: Var) -> Result<Var> {
        self.decoder.iter().try_fold(z, |h, b| b.forward(tape, store, h))
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let z = self.encode_var(tape, store, x)?;
        self.decode_var(tape, store, z)
    }

    fn check_features(&self, x: &VertexFeatures) -> Result<()> {
        if x.num_vertices() != self.base_vertices() || x.channels() != self.input_channels() {
            return Err(Error::InvalidInput(format!(
                "model expects {}x{} features, got {}x{}",
                self.base_vertices(),
                self.input_channels(),
                x.num_vertices(),
                x.channels()
            )));
        }
        Ok(())
    }
}

impl AutoencoderModel {
    pub fn fingerprint(&self) -> u64 {
        self.net.fingerprint
    }

    pub fn param_count(&self) -> usize {
        self.net.param_count()
    }

    pub fn encode(&self, x: &VertexFeatures) -> Result<LatentCode> {
        self.net.check_features(x)?;
        let mut tape = Tape::new();
        let input = tape.leaf(features_to_tensor(x));
        let z = self.net.encode_var(&mut tape, &self.params, input)?;
        Ok(LatentCode::new(tape.value(z).clone(), self.fingerprint()))
    }

    pub fn decode(&self, code: &LatentCode) -> Result<VertexFeatures> {
        code.check_fingerprint(self.fingerprint())?;
        let (l, c) = self.net.latent_shape();
        if code.values.rows() != l || code.values.cols() != c {
            return Err(Error::InvalidInput(format!(
                "latent code is {}x{}, model expects {l}x{c}",
                code.values.rows(),
                code.values.cols()
            )));
        }
        let mut tape = Tape::new();
        let z = tape.leaf(code.values.clone());
        let y = self.net.decode_var(&mut tape, &self.params, z)?;
        tensor_to_features(tape.value(y))
    }

    pub fn reconstruct(&self, x: &VertexFeatures) -> Result<VertexFeatures> {
        self.decode(&self.encode(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshTopology;
    use crate::sampling::{build_hierarchy, LevelSpec};

    fn path_hierarchy() -> SamplingHierarchy {
        let path = MeshTopology::from_edges(5, (0..4).map(|i| (i, i + 1))).unwrap();
        build_hierarchy(&path, &[LevelSpec::new(2, 1).pinned(vec![0])], 0).unwrap()
    }

    #[test]
    fn auto_basis_on_path_map() {
        let h = path_hierarchy();
        // down rows have sizes 2, 3, 2
        assert_eq!(auto_basis_size(&h.levels[0].down), 2);
    }

    #[test]
    fn plan_length_checked() {
        let h = path_hierarchy();
        assert!(matches!(
            build_autoencoder(&h, &ModelConfig::new(vec![3, 8, 8, 3])),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_autoencoder(&h, &ModelConfig::new(vec![3, 8, 2])),
            Err(Error::Config(_))
        ));
        let mut cfg = ModelConfig::new(vec![3, 8, 3]);
        cfg.basis = BasisPlan::PerBlock(vec![2]);
        assert!(matches!(build_autoencoder(&h, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn param_count_is_additive_and_registered() {
        let h = path_hierarchy();
        let m = build_autoencoder(&h, &ModelConfig::new(vec![3, 8, 3])).unwrap();
        let sum: usize = m.net.layer_counts().iter().map(|l| l.count).sum();
        assert_eq!(m.param_count(), sum);
        assert_eq!(m.params.scalar_count(), sum);
    }

    #[test]
    fn zero_input_encodes_to_zero() {
        let h = path_hierarchy();
        let m = build_autoencoder(&h, &ModelConfig::new(vec![3, 8, 3])).unwrap();
        let z = m.encode(&VertexFeatures::zeros(5, 3)).unwrap();
        assert!(z.values.data().iter().all(|&v| v == 0.0));
    }
}
