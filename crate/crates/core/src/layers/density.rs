use rand::Rng;

use super::{check_input, uniform_tensor};
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::sampling::{Direction, SamplingMap};

/// Learned per-neighbor densities `ρ` for pooling and unpooling.
///
/// Aggregation weights are `ρ'(i,j) = |ρ(i,j)| / Σⱼ |ρ(i,j)|`, so each output
/// is a convex combination of its neighborhood and constant signals pass
/// through unchanged.
#[derive(Debug, Clone)]
pub struct VdWeights {
    pub map: SamplingMap,
    /// `[ΣEᵢ, 1]`, initialized to 1 (plain averaging).
    pub density: ParamId,
}

impl VdWeights {
    pub fn new(store: &mut ParamStore, name: &str, map: SamplingMap) -> Self {
        let density = store.register(format!("{name}.density"), Tensor::filled(map.total_neighbors(), 1, 1.0));
        VdWeights { map, density }
    }

    pub fn param_count(&self) -> usize {
        self.map.total_neighbors()
    }

    /// Normalized weights `ρ'` as a `[ΣEᵢ, 1]` tape value.
    pub fn normalized(&self, tape: &mut Tape, store: &ParamStore) -> Result<Var> {
        let rho = tape.param(store, self.density);
        let abs = tape.abs(rho);
        tape.segment_normalize(abs, self.map.table())
    }

    pub fn normalized_values(&self, store: &ParamStore) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let v = self.normalized(&mut tape, store)?;
        Ok(tape.value(v).data().to_vec())
    }

    /// Density-weighted aggregation without a direction check.
    pub fn aggregate(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let c = tape.value(x).cols();
        check_input("vdPool", tape.value(x), self.map.in_vertices(), c)?;
        let w = self.normalized(tape, store)?;
        tape.ragged_weighted_sum(w, x, self.map.table())
    }

    pub fn pool(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        expect_direction(&self.map, Direction::Down, "vdPool")?;
        self.aggregate(tape, store, x)
    }

    pub fn unpool(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        expect_direction(&self.map, Direction::Up, "vdUnpool")?;
        self.aggregate(tape, store, x)
    }
}

pub(crate) fn expect_direction(map: &SamplingMap, want: Direction, layer: &str) -> Result<()> {
    if map.direction != want {
        return Err(Error::Config(format!(
            "{layer} needs a {} map, got a {} map",
            want.as_str(),
            map.direction.as_str()
        )));
    }
    Ok(())
}

/// Residual path of a sampling block: `yᵢ = Σⱼ ρ'(i,j) C x_{i,j}`.
///
/// `C` is the identity (and not a parameter) when the channel counts agree,
/// otherwise a learned `[O, I]` matrix shared by all vertices.
#[derive(Debug, Clone)]
pub struct VdResLayer {
    pub vd: VdWeights,
    pub in_channels: usize,
    pub out_channels: usize,
    pub channel_map: Option<ParamId>,
}

impl VdResLayer {
    /// A learned `C` starts uniform in `±sqrt(6 / (I + O))`.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        map: SamplingMap,
        in_channels: usize,
        out_channels: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::Config(format!("{name}: channel counts must be positive")));
        }
        let vd = VdWeights::new(store, name, map);
        let channel_map = (in_channels != out_channels).then(|| {
            let bound = (6.0 / (in_channels + out_channels) as f64).sqrt();
            store.register(
                format!("{name}.channel_map"),
                uniform_tensor(rng, out_channels, in_channels, bound),
            )
        });
        Ok(VdResLayer {
            vd,
            in_channels,
            out_channels,
            channel_map,
        })
    }

    pub fn param_count(&self) -> usize {
        let c = if self.channel_map.is_some() {
            self.in_channels * self.out_channels
        } else {
            0
        };
        self.vd.param_count() + c
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        std::iter::once(self.vd.density).chain(self.channel_map).collect()
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        check_input("vdRes", tape.value(x), self.vd.map.in_vertices(), self.in_channels)?;
        let pooled = self.vd.aggregate(tape, store, x)?;
        match self.channel_map {
            None => Ok(pooled),
            Some(id) => {
                let c = tape.param(store, id);
                let ct = tape.transpose(c);
                tape.matmul(pooled, ct)
            }
        }
    }
}
