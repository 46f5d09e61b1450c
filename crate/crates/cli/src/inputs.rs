use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use hazardforge_core::fusion::fuse_cohort;
use hazardforge_core::io::{read_embeddings, read_long_csv, read_schema};
use hazardforge_core::{DatasetSchema, EmbeddingStream, Episode, Error, HazardEnsemble};

use crate::failure::{CliError, CliResult};
use crate::manifest::Run;

fn open(path: &Path, missing_kind: &str) -> CliResult<BufReader<File>> {
    if !path.is_file() {
        return Err(CliError::missing(missing_kind, path));
    }
    Ok(BufReader::new(File::open(path)?))
}

pub fn load_schema(run: &mut Run, path: &Path) -> CliResult<DatasetSchema> {
    if !path.is_file() {
        return Err(CliError::missing("SchemaMissing", path));
    }
    run.input("schema", path)?;
    Ok(read_schema(path)?)
}

pub fn load_json<T: serde::de::DeserializeOwned>(
    run: &mut Run,
    role: &str,
    path: &Path,
    missing_kind: &str,
) -> CliResult<T> {
    let reader = open(path, missing_kind)?;
    run.input(role, path)?;
    Ok(serde_json::from_reader(reader)?)
}

pub fn load_episodes(run: &mut Run, path: &Path, schema: &DatasetSchema) -> CliResult<Vec<Episode>> {
    let reader = open(path, "DataMissing")?;
    run.input("data", path)?;
    Ok(read_long_csv(reader, schema)?)
}

pub fn load_embeddings(run: &mut Run, path: &Path) -> CliResult<Vec<EmbeddingStream>> {
    let reader = open(path, "EmbeddingsMissing")?;
    run.input("embeddings", path)?;
    Ok(read_embeddings(reader)?)
}

pub fn load_model(run: &mut Run, path: &Path) -> CliResult<HazardEnsemble> {
    if !path.is_file() {
        return Err(CliError::missing("ModelMissing", path));
    }
    let text = fs::read_to_string(path)?;
    run.input("model", path)?;
    Ok(HazardEnsemble::from_json(&text)?)
}

/// Fuses embeddings into a training cohort. The block width comes from the
/// vectors themselves.
pub fn fuse_for_training(
    episodes: Vec<Episode>,
    schema: DatasetSchema,
    streams: &[EmbeddingStream],
) -> CliResult<(Vec<Episode>, DatasetSchema)> {
    let width = match (schema.embedding_block(), streams.iter().find_map(|s| s.width())) {
        (Some(block), _) => block.len(),
        (None, Some(w)) => w,
        (None, None) => {
            return Err(Error::InvalidConfig("embedding file holds no vectors".into()).into())
        }
    };
    Ok(fuse_cohort(&episodes, streams, &schema, width)?)
}

pub fn out_dir(path: &Path) -> CliResult<PathBuf> {
    fs::create_dir_all(path)?;
    Ok(path.to_path_buf())
}
