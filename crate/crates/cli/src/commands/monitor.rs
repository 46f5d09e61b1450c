use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use hazardforge_core::io::LongCsvRows;
use hazardforge_core::monitor::{StreamingMonitor, OUTPUT_HEADER};
use serde::Serialize;

use crate::failure::{CliError, CliResult};
use crate::inputs::{load_embeddings, load_model, load_schema, out_dir};
use crate::manifest::{HashingReader, Run};

#[derive(Debug, Args)]
pub struct MonitorArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Long-format epoch stream; `-` reads stdin.
    #[arg(long, default_value = "-")]
    pub data: PathBuf,
    /// Schema of the incoming rows, with or without the embedding block.
    #[arg(long)]
    pub schema: PathBuf,
    /// Note embeddings registered before the stream is read.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Directory for hazards.csv; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct MonitorConfig {
    side_channel: bool,
}

pub fn run(args: MonitorArgs) -> CliResult<()> {
    let mut run = Run::start("monitor");
    let model = load_model(&mut run, &args.model)?;
    let schema = load_schema(&mut run, &args.schema)?;
    let mut monitor = StreamingMonitor::new(&model, &schema)?;
    let side_channel = match &args.embeddings {
        Some(path) => {
            for stream in load_embeddings(&mut run, path)? {
                monitor.push_stream(&stream)?;
            }
            true
        }
        None => false,
    };

    let stdin = args.data == Path::new("-");
    let source: Box<dyn Read> = if stdin {
        Box::new(io::stdin().lock())
    } else if args.data.is_file() {
        Box::new(File::open(&args.data)?)
    } else {
        return Err(CliError::missing("DataMissing", &args.data));
    };
    let (reader, digest) = HashingReader::new(source);
    let mut reader = BufReader::new(reader);

    let dir = args.out.as_deref().map(out_dir).transpose()?;
    let sink: Box<dyn Write> = match &dir {
        Some(dir) => Box::new(BufWriter::new(File::create(dir.join("hazards.csv"))?)),
        None => Box::new(io::stdout().lock()),
    };
    let mut out = csv::Writer::from_writer(sink);

    if !reader.fill_buf()?.is_empty() {
        let mut rows = LongCsvRows::new(reader, &schema)?;
        out.write_record(OUTPUT_HEADER)?;
        while let Some(row) = rows.next() {
            match row {
                Ok(row) => {
                    for r in monitor.push_epoch(&row.episode_id, &row.epoch) {
                        r.write_csv(&mut out)?;
                    }
                }
                Err(e) => {
                    let id = rows.current_episode_id().map(str::to_owned);
                    monitor.push_error(id.as_deref(), &e).write_csv(&mut out)?;
                }
            }
            out.flush()?;
        }
    }
    out.flush()?;
    drop(out);

    if let Some(dir) = dir {
        let data = if stdin { "-".to_string() } else { args.data.display().to_string() };
        run.input_digest("data", data, digest.hex_digest());
        run.output("hazards", dir.join("hazards.csv"));
        run.finish(&dir, &MonitorConfig { side_channel }, None)?;
    }
    Ok(())
}
