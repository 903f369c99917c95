//! Run manifests and output files.
//!
//! CSV outputs start with a single `# manifest: {json}` comment line; JSON outputs are objects
//! with `manifest` and `data` fields. Nothing time-dependent goes into a manifest, so identical
//! runs produce identical bytes.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atom::AtomModel;
use crate::dynamics::Trace;
use crate::error::{Error, Result};
use crate::fields::MAGNETIC_FIELD_CONVENTION;
use crate::gate::{basis_label, ExcitationPattern, GateSimulator, OperatingPoint, TruthTable};

pub const CSV_MANIFEST_PREFIX: &str = "# manifest: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub atomic_data_version: String,
    pub atomic_data_checksum: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub basis_fingerprints: Vec<String>,
    pub magnetic_field_convention: String,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, config: &C, model: &AtomModel) -> Result<Self> {
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: serde_json::to_value(config)?,
            atomic_data_version: model.version().to_string(),
            atomic_data_checksum: model.checksum().to_string(),
            basis_fingerprints: Vec::new(),
            magnetic_field_convention: MAGNETIC_FIELD_CONVENTION.to_string(),
        })
    }

    pub fn with_basis(mut self, fingerprint: String) -> Self {
        self.basis_fingerprints.push(fingerprint);
        self
    }

    /// Reads the manifest line of a CSV written by [`write_csv`].
    pub fn from_csv(text: &str) -> Option<Self> {
        let line = text.lines().next()?.strip_prefix(CSV_MANIFEST_PREFIX)?;
        serde_json::from_str(line).ok()
    }
}

/// Opens `path` for writing; an existing file is an error unless `force`.
pub fn create_output(path: &Path, force: bool) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let file = opts.open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::AlreadyExists {
            Error::Io(std::io::Error::new(e.kind(), format!("{} exists; pass --force to overwrite", path.display())))
        } else {
            Error::Io(e)
        }
    })?;
    Ok(BufWriter::new(file))
}

/// Writes the manifest line and then whatever `body` emits.
pub fn write_csv(
    path: &Path,
    manifest: &RunManifest,
    force: bool,
    body: impl FnOnce(&mut dyn Write) -> Result<()>,
) -> Result<()> {
    let mut out = create_output(path, force)?;
    writeln!(out, "{CSV_MANIFEST_PREFIX}{}", serde_json::to_string(manifest)?)?;
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    manifest: &'a RunManifest,
    data: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, manifest: &RunManifest, data: &T, force: bool) -> Result<()> {
    let mut out = create_output(path, force)?;
    serde_json::to_writer_pretty(&mut out, &Envelope { manifest, data })?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Long-format traces: one block of rows per excitation pattern.
pub fn write_pattern_traces<W: Write>(traces: &[(ExcitationPattern, Trace)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pattern", "t_us", "p", "phase_rad", "norm"])?;
    for (pattern, tr) in traces {
        for i in 0..tr.len() {
            w.write_record([
                pattern.label(),
                format!("{:.6}", tr.times_us[i]),
                format!("{:.12e}", tr.population[i]),
                tr.phase[i].map(|p| format!("{p:.12e}")).unwrap_or_default(),
                format!("{:.12e}", tr.norm[i]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Return amplitude of one computational input's excitation pattern.
#[derive(Debug, Clone, Serialize)]
pub struct ResponseRecord {
    pub input: String,
    pub pattern: String,
    pub re: f64,
    pub im: f64,
    pub population: f64,
    pub phase_rad: f64,
    pub surviving_norm: f64,
}

/// Everything the truth-table and fidelity outputs carry.
#[derive(Debug, Clone, Serialize)]
pub struct GateReport {
    pub operating_point: Option<OperatingPoint>,
    pub protocol_duration_us: Option<f64>,
    pub decay: bool,
    pub responses: Vec<ResponseRecord>,
    pub truth_table: TruthTable,
    pub truth_table_renormalized: [[f64; 8]; 8],
    pub average_fidelity: Option<f64>,
    pub min_fidelity: Option<f64>,
}

impl GateReport {
    /// Fidelity over the 216 inputs is evaluated only when `with_fidelity`.
    pub fn new(sim: &GateSimulator, with_fidelity: bool) -> Self {
        let responses = sim
            .responses()
            .iter()
            .enumerate()
            .map(|(i, r)| ResponseRecord {
                input: basis_label(i),
                pattern: ExcitationPattern::for_input(i).label(),
                re: r.amplitude.re,
                im: r.amplitude.im,
                population: r.population(),
                phase_rad: r.amplitude.arg(),
                surviving_norm: r.surviving_norm,
            })
            .collect();
        let truth_table = sim.truth_table();
        let fidelity = with_fidelity.then(|| sim.average_fidelity());
        Self {
            operating_point: sim.operating_point().copied(),
            protocol_duration_us: sim.operating_point().map(|op| op.protocol_duration_us()),
            decay: sim.with_decay(),
            responses,
            truth_table_renormalized: truth_table.renormalized(),
            truth_table,
            average_fidelity: fidelity.as_ref().map(|f| f.mean),
            min_fidelity: fidelity.as_ref().map(|f| f.min),
        }
    }
}
