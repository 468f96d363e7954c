//! Text format for trained parameters: one JSON header line followed by one
//! value per line.
//!
//! ```text
//! {"kind":"kan","widths":[1,10,1],"k":3,"G":5,"seed":0,"count":200}
//! -0.0123
//! ...
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KanNetwork, MlpNetwork, Network, NetworkError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkHeader {
    pub kind: String,
    pub widths: Vec<usize>,
    #[serde(rename = "k", skip_serializing_if = "Option::is_none", default)]
    pub degree: Option<usize>,
    #[serde(rename = "G", skip_serializing_if = "Option::is_none", default)]
    pub grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    pub count: usize,
}

impl NetworkHeader {
    pub fn describe(net: &Network, seed: Option<u64>) -> Self {
        let (degree, grid) = match net {
            Network::Kan(k) => (Some(k.basis().degree()), Some(k.basis().intervals())),
            Network::Mlp(_) => (None, None),
        };
        NetworkHeader {
            kind: net.kind().to_string(),
            widths: net.widths().to_vec(),
            degree,
            grid,
            seed,
            count: net.num_params(),
        }
    }

    pub fn build(&self) -> Result<Network, NetworkError> {
        let net = match self.kind.as_str() {
            "kan" => Network::Kan(KanNetwork::new(
                &self.widths,
                self.degree.unwrap_or(3),
                self.grid.unwrap_or(5),
            )?),
            "mlp" => Network::Mlp(MlpNetwork::new(&self.widths)?),
            other => return Err(NetworkError::Format(format!("unknown network kind '{other}'"))),
        };
        if net.num_params() != self.count {
            return Err(NetworkError::Format(format!(
                "header declares {} parameters, architecture has {}",
                self.count,
                net.num_params()
            )));
        }
        Ok(net)
    }
}

pub fn write_params(out: &mut impl Write, net: &Network, params: &[f64], seed: Option<u64>) -> Result<(), NetworkError> {
    if params.len() != net.num_params() {
        return Err(NetworkError::DimensionMismatch {
            what: "network parameters",
            expected: net.num_params(),
            got: params.len(),
        });
    }
    let header = NetworkHeader::describe(net, seed);
    let line = serde_json::to_string(&header).map_err(|e| NetworkError::Format(e.to_string()))?;
    writeln!(out, "{line}")?;
    for p in params {
        // Display for f64 is the shortest representation that round-trips
        writeln!(out, "{p}")?;
    }
    Ok(())
}

pub fn save_params(path: &Path, net: &Network, params: &[f64], seed: Option<u64>) -> Result<(), NetworkError> {
    let mut buf = Vec::new();
    write_params(&mut buf, net, params, seed)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn parse_params(text: &str) -> Result<(NetworkHeader, Network, Vec<f64>), NetworkError> {
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| NetworkError::Format("empty file".into()))?;
    let header: NetworkHeader =
        serde_json::from_str(first).map_err(|e| NetworkError::Format(format!("bad header: {e}")))?;
    let net = header.build()?;
    let params = lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| NetworkError::Format(format!("value {}: {e}", i + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if params.len() != header.count {
        return Err(NetworkError::Format(format!(
            "expected {} values, found {}",
            header.count,
            params.len()
        )));
    }
    Ok((header, net, params))
}

pub fn load_params(path: &Path) -> Result<(NetworkHeader, Network, Vec<f64>), NetworkError> {
    parse_params(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn roundtrip(seed in 0u64..1000, hidden in 1usize..6, mlp in any::<bool>()) {
            let net = if mlp {
                Network::Mlp(MlpNetwork::new(&[2, hidden, 1]).unwrap())
            } else {
                Network::Kan(KanNetwork::new(&[2, hidden, 1], 3, 5).unwrap())
            };
            let params = net.init_params(seed);
            let mut buf = Vec::new();
            write_params(&mut buf, &net, &params, Some(seed)).unwrap();
            let (header, net2, params2) = parse_params(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(header.seed, Some(seed));
            prop_assert_eq!(net2, net);
            prop_assert_eq!(params2, params);
        }
    }

    #[test]
    fn header_names() {
        let net = Network::Kan(KanNetwork::new(&[1, 10, 1], 3, 5).unwrap());
        let h = serde_json::to_string(&NetworkHeader::describe(&net, Some(0))).unwrap();
        assert_eq!(h, r#"{"kind":"kan","widths":[1,10,1],"k":3,"G":5,"seed":0,"count":200}"#);
    }

    #[test]
    fn truncated_file_rejected() {
        let net = Network::Mlp(MlpNetwork::new(&[1, 2, 1]).unwrap());
        let mut buf = Vec::new();
        write_params(&mut buf, &net, &net.init_params(0), None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(parse_params(&cut).is_err());
        assert!(parse_params("").is_err());
        assert!(parse_params("{\"kind\":\"cnn\",\"widths\":[1,1],\"count\":2}\n1\n2").is_err());
    }
}
