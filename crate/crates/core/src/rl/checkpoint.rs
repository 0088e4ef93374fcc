use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::QNetwork;
use crate::error::{Error, Result};
use crate::sim::ObservationScales;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Portable JSON form of a [`QNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layer_sizes: Vec<usize>,
    pub activation: String,
    pub obs_scales: ObservationScales,
    pub params: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn from_network(net: &QNetwork, obs_scales: ObservationScales) -> Self {
        Self {
            layer_sizes: net.sizes().to_vec(),
            activation: "tanh".into(),
            obs_scales,
            params: net
                .named_blocks()
                .into_iter()
                .map(|(name, shape, data)| NamedArray {
                    name,
                    shape,
                    data: data.to_vec(),
                })
                .collect(),
        }
    }

    pub fn to_network(&self) -> Result<QNetwork> {
        if self.activation != "tanh" {
            return Err(Error::Contract(format!("unsupported activation `{}`", self.activation)));
        }
        for a in &self.params {
            if a.shape.iter().product::<usize>() != a.data.len() {
                return Err(Error::Contract(format!("array `{}` does not match its shape", a.name)));
            }
        }
        let flat = self.params.iter().flat_map(|a| a.data.iter().copied()).collect();
        let net = QNetwork::from_params(&self.layer_sizes, flat)?;
        let expected: Vec<_> = net.named_blocks().into_iter().map(|(n, s, _)| (n, s)).collect();
        let got: Vec<_> = self.params.iter().map(|a| (a.name.clone(), a.shape.clone())).collect();
        if expected != got {
            return Err(Error::Contract("parameter arrays out of order or misnamed".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }
}
