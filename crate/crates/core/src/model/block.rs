use rand::Rng;

use crate::autodiff::{ParamId, ParamStore, Tape, Var};
use crate::error::Result;
use crate::layers::{VcConvLayer, VdResLayer};
use crate::sampling::{Direction, SamplingMap};

/// Convolution (or transpose convolution) followed by Elu, summed with a
/// density-weighted residual path over the same map.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub conv: VcConvLayer,
    pub residual: Option<VdResLayer>,
    pub activation: bool,
}

impl ResidualBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        map: SamplingMap,
        in_channels: usize,
        out_channels: usize,
        basis_size: usize,
        residual: bool,
        normalize_basis: bool,
        activation: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let conv = VcConvLayer::new(
            store,
            &format!("{name}.conv"),
            map.clone(),
            in_channels,
            out_channels,
            basis_size,
            normalize_basis,
            rng,
        )?;
        let residual = if residual {
            Some(VdResLayer::new(
                store,
                &format!("{name}.res"),
                map,
                in_channels,
                out_channels,
                rng,
            )?)
        } else {
            None
        };
        Ok(ResidualBlock {
            conv,
            residual,
            activation,
        })
    }

    pub fn direction(&self) -> Direction {
        self.conv.map.direction
    }

    pub fn param_count(&self) -> usize {
        self.conv.param_count() + self.residual.as_ref().map_or(0, |r| r.param_count())
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids = self.conv.param_ids();
        if let Some(r) = &self.residual {
            ids.extend(r.param_ids());
        }
        ids
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut main = match self.direction() {
            Direction::Down => self.conv.forward(tape, store, x)?,
            Direction::Up => self.conv.forward_transposed(tape, store, x)?,
        };
        if self.activation {
            main = tape.elu(main);
        }
        match &self.residual {
            Some(res) => {
                let skip = res.forward(tape, store, x)?;
                tape.add(main, skip)
            }
            None => Ok(main),
        }
    }
}
