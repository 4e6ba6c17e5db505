use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use cageforge_core::annotation::format as annotation_format;
use cageforge_core::annotation::transfer::transfer_annotations;
use cageforge_core::cage::generate::{generate_cage, CageOptions};
use cageforge_core::cage::io as coords_io;
use cageforge_core::cage::{self, CoordinateMethod};
use cageforge_core::fitting::FitOptions;
use cageforge_core::mesh::io::{load_mesh, save_mesh};
use cageforge_core::semgraph::{self, format as graph_format};
use cageforge_core::solver::{build_session, SolverOptions};
use cageforge_core::{Annotation, Coordinates, Graph, Mesh};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Result, ShellError};
use crate::ops::{parse_landmarks, parse_script, PinFile};
use crate::pipeline::{self, deformed_positions, FitInput};
use crate::service::{parse_plane, DEFAULT_PRUNING_DEG};

#[derive(Debug, Parser)]
#[command(name = "cageforge", version, about = "Semantics-aware cage-based mesh deformation")]
pub struct Cli {
    /// Report errors as JSON on stderr.
    #[arg(long, global = true, env = "CAGEFORGE_JSON")]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mvc,
    Gc,
}

impl From<Method> for CoordinateMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Mvc => CoordinateMethod::MeanValue,
            Method::Gc => CoordinateMethod::Green,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Largest number of local-global iterations.
    #[arg(long, env = "CAGEFORGE_ITERS", default_value_t = 500)]
    pub iters: usize,
    /// Convergence threshold relative to the cage diagonal.
    #[arg(long, env = "CAGEFORGE_TOL", default_value_t = 1e-7)]
    pub tol: f64,
    #[arg(long, env = "CAGEFORGE_PIN_WEIGHT_FACTOR", default_value_t = 1e4)]
    pub pin_weight_factor: f64,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions<f64> {
        SolverOptions {
            max_iterations: self.iters,
            tolerance: self.tol,
            pin_weight_factor: self.pin_weight_factor,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[arg(long, env = "CAGEFORGE_FIT_WEIGHT", default_value_t = 1.0)]
    pub fit_weight: f64,
    /// Correspondence cap as a fraction of the fragment diagonal.
    #[arg(long, env = "CAGEFORGE_DIST_CAP", default_value_t = 0.1)]
    pub dist_cap: f64,
    /// Largest normal deviation of a correspondence, in degrees.
    #[arg(long, env = "CAGEFORGE_NORMAL_DEG", default_value_t = 60.0)]
    pub normal_deg: f64,
    #[arg(long, env = "CAGEFORGE_OUTER_ITERS", default_value_t = 20)]
    pub outer_iters: usize,
}

impl FitArgs {
    pub fn options(&self) -> FitOptions<f64> {
        FitOptions {
            fit_weight: self.fit_weight,
            distance_cap: self.dist_cap,
            normal_degrees: self.normal_deg,
            max_outer_iterations: self.outer_iters,
            ..FitOptions::default()
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a mesh and print its topology summary.
    Validate { mesh: PathBuf },
    /// Cut a mesh with a plane and print loops, descriptors and skeleton.
    Slice {
        mesh: PathBuf,
        /// `nx,ny,nz,offset` of the plane `n·p = offset`.
        #[arg(long, allow_hyphen_values = true)]
        plane: String,
        /// Medial-axis sampling step; defaults to 1/200 of the mesh diagonal.
        #[arg(long)]
        step: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_PRUNING_DEG)]
        pruning: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    #[command(subcommand)]
    Cage(CageCommand),
    /// Bind a template to a cage and write the coordinate file.
    Bind {
        template: PathBuf,
        cage: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Mvc)]
        method: Method,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Apply a handle script to the cage and write the deformed template.
    Deform {
        template: PathBuf,
        cage: PathBuf,
        coords: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// Annotation file for script steps that select by annotation.
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        cage_output: Option<PathBuf>,
    },
    #[command(subcommand)]
    Annotate(AnnotateCommand),
    #[command(subcommand)]
    Graph(GraphCommand),
    /// Solve the graph's constraints with pinned handles.
    Constrain {
        template: PathBuf,
        cage: PathBuf,
        coords: PathBuf,
        annotations: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        handles: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        cage_output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Place a template on a fragment and fit it.
    Fit {
        template_doc: PathBuf,
        fragment_doc: PathBuf,
        #[arg(long)]
        landmarks: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
        /// Fitted template mesh.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Fragment in the template's frame.
        #[arg(long)]
        fragment_output: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Move annotations onto another mesh.
    Transfer {
        source: PathBuf,
        annotations: PathBuf,
        target: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the local service.
    Serve {
        #[arg(long, env = "CAGEFORGE_PORT", default_value_t = 7878)]
        port: u16,
        #[arg(long, env = "CAGEFORGE_HOST", default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Debug, Subcommand)]
pub enum CageCommand {
    /// Generate a closed cage around a mesh.
    Gen {
        mesh: PathBuf,
        /// Offset as a fraction of a tenth of the bounding-box diagonal.
        #[arg(long, env = "CAGEFORGE_OFFSET", default_value_t = 0.55)]
        offset: f64,
        #[arg(long, env = "CAGEFORGE_FACES", default_value_t = 200)]
        faces: usize,
        #[arg(long, default_value_t = 3)]
        cells_per_offset: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum AnnotateCommand {
    /// Validate an annotation file against its mesh.
    Check { mesh: PathBuf, annotations: PathBuf },
    /// Print stored and recomputed measure values.
    Measure { mesh: PathBuf, annotations: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Derive structural relationships from the annotations.
    Extract {
        mesh: PathBuf,
        annotations: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Files describing a mesh with its annotations and optional binding.
/// Relative paths are resolved against the document's directory.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocFile {
    mesh: PathBuf,
    annotations: PathBuf,
    graph: Option<PathBuf>,
    cage: Option<PathBuf>,
    coords: Option<PathBuf>,
}

impl DocFile {
    fn read(path: &Path) -> Result<(Self, PathBuf)> {
        let doc: DocFile = serde_json::from_str(&read_text(path)?)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((doc, base))
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| ShellError::invalid("Io", format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| ShellError::invalid("Io", format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn print_json(out: &mut dyn Write, value: &Value) -> Result<()> {
    writeln!(out, "{}", serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn mesh(path: &Path) -> Result<Mesh> {
    load_mesh(path, None).map_err(|e| {
        let mut e = ShellError::from(e);
        e.message = format!("{}: {}", path.display(), e.message);
        e
    })
}

fn annotations(path: &Path, mesh: &Mesh) -> Result<Vec<Annotation>> {
    Ok(annotation_format::parse_annotations(&read_text(path)?, mesh)?)
}

fn coords(path: &Path) -> Result<Coordinates> {
    Ok(coords_io::parse_coords(&read_text(path)?)?)
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Validate { mesh: path } => print_json(out, &pipeline::mesh_summary(&mesh(path)?)),
        Command::Slice {
            mesh: path,
            plane,
            step,
            pruning,
            output,
        } => {
            let record = pipeline::slice_record(&mesh(path)?, parse_plane(plane)?, *step, *pruning)?;
            match output {
                Some(o) => write_json(o, &record),
                None => print_json(out, &record),
            }
        }
        Command::Cage(CageCommand::Gen {
            mesh: path,
            offset,
            faces,
            cells_per_offset,
            output,
        }) => {
            let template = mesh(path)?;
            let generated = generate_cage(
                &template,
                &CageOptions {
                    offset_fraction: *offset,
                    target_faces: *faces,
                    cells_per_offset: *cells_per_offset,
                },
            )?;
            save_mesh(&generated.cage, output, None)?;
            print_json(
                out,
                &json!({
                    "vertices": generated.cage.vertex_count(),
                    "triangles": generated.cage.triangle_count(),
                    "genus": generated.cage.genus(),
                    "violations": generated.violations,
                }),
            )?;
            if generated.violations.is_empty() {
                Ok(())
            } else {
                Err(ShellError::invalid(
                    "EnclosureViolation",
                    format!("{} template vertices are not strictly inside the cage", generated.violations.len()),
                ))
            }
        }
        Command::Bind {
            template,
            cage,
            method,
            output,
        } => {
            let c = cage::compute_coords((*method).into(), &mesh(template)?, &mesh(cage)?)?;
            Ok(coords_io::write_coords(&c, output)?)
        }
        Command::Deform {
            template,
            cage: cage_path,
            coords: coords_path,
            script,
            annotations: ann_path,
            output,
            cage_output,
        } => {
            let (t, rest, w) = (mesh(template)?, mesh(cage_path)?, coords(coords_path)?);
            let steps = parse_script(&read_text(script)?)?;
            let anns = match ann_path {
                Some(p) => annotations(p, &t)?,
                None => Vec::new(),
            };
            let moved = pipeline::run_script(&rest, &steps, &w, &t, &anns)?;
            let positions = deformed_positions(&t, &w, &rest, &moved)?;
            save_mesh(&t.with_positions(positions), output, None)?;
            if let Some(p) = cage_output {
                save_mesh(&moved, p, None)?;
            }
            Ok(())
        }
        Command::Annotate(AnnotateCommand::Check { mesh: path, annotations: a }) => {
            let m = mesh(path)?;
            print_json(out, &pipeline::annotation_summary(&m, &annotations(a, &m)?))
        }
        Command::Annotate(AnnotateCommand::Measure { mesh: path, annotations: a }) => {
            let m = mesh(path)?;
            print_json(out, &pipeline::measure_report(&m, &annotations(a, &m)?)?)
        }
        Command::Graph(GraphCommand::Extract {
            mesh: path,
            annotations: a,
            output,
        }) => {
            let m = mesh(path)?;
            let anns = annotations(a, &m)?;
            let mut graph = Graph::new(&anns);
            graph.extend_structure(semgraph::extract_structure(&m, &anns));
            write_text(output, &graph_format::to_json(&graph))
        }
        Command::Constrain {
            template,
            cage: cage_path,
            coords: coords_path,
            annotations: a,
            graph,
            handles,
            output,
            report,
            cage_output,
            solver,
        } => {
            let (t, c, w) = (mesh(template)?, mesh(cage_path)?, coords(coords_path)?);
            let anns = annotations(a, &t)?;
            let g = graph_format::parse_graph(&read_text(graph)?, &anns)?;
            let pins = PinFile::parse(&read_text(handles)?)?;
            let mut session = build_session(&c, &w, &t, &g, &anns, &pins.held(), solver.options())?;
            let (solved, residuals) = session.solve(&pins.targets())?;
            let positions = deformed_positions(&t, &w, &c, &solved)?;
            save_mesh(&t.with_positions(positions), output, None)?;
            if let Some(p) = cage_output {
                save_mesh(&solved, p, None)?;
            }
            write_json(report, &serde_json::to_value(&residuals)?)
        }
        Command::Fit {
            template_doc,
            fragment_doc,
            landmarks,
            report,
            output,
            fragment_output,
            solver,
            fit,
        } => {
            let (td, tbase) = DocFile::read(template_doc)?;
            let (fd, fbase) = DocFile::read(fragment_doc)?;
            let t = mesh(&tbase.join(&td.mesh))?;
            let t_anns = annotations(&tbase.join(&td.annotations), &t)?;
            let graph = td
                .graph
                .as_ref()
                .map(|g| -> Result<Graph> { Ok(graph_format::parse_graph(&read_text(&tbase.join(g))?, &t_anns)?) })
                .transpose()?;
            let c = mesh(&tbase.join(td.cage.as_ref().ok_or_else(|| ShellError::invalid("Schema", "template document needs a cage"))?))?;
            let w = match &td.coords {
                Some(p) => coords(&tbase.join(p))?,
                None => cage::compute_mvc(&t, &c)?,
            };
            let f = mesh(&fbase.join(&fd.mesh))?;
            let f_anns = annotations(&fbase.join(&fd.annotations), &f)?;
            let lm = landmarks.as_ref().map(|p| read_text(p).and_then(|s| parse_landmarks(&s))).transpose()?;
            let outcome = pipeline::fit(FitInput {
                template: &t,
                annotations: &t_anns,
                graph: graph.as_ref(),
                cage: &c,
                coords: &w,
                fragment: &f,
                fragment_annotations: &f_anns,
                landmarks: lm,
                solver: solver.options(),
                fit: fit.options(),
            })?;
            if let Some(p) = output {
                save_mesh(&outcome.fitted, p, None)?;
            }
            if let Some(p) = fragment_output {
                save_mesh(&outcome.placed_fragment, p, None)?;
            }
            write_json(report, &outcome.report_json())
        }
        Command::Transfer {
            source,
            annotations: a,
            target,
            output,
        } => {
            let src = mesh(source)?;
            let moved = transfer_annotations(&src, &annotations(a, &src)?, &mesh(target)?)?;
            write_text(output, &annotation_format::to_json(&moved))
        }
        Command::Serve { port, host } => {
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(crate::service::serve(host, *port))?;
            Ok(())
        }
    }
}

fn report(e: &ShellError, json: bool, err: &mut dyn Write) {
    let text = if json {
        e.to_json().to_string()
    } else {
        format!("error: {} ({})", e.message, e.name)
    };
    let _ = writeln!(err, "{text}");
}

/// Parse `args`, run the command and return the process exit code.
pub fn execute<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json = args.iter().any(|a| a == "--json");
    match Cli::try_parse_from(&args) {
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                let _ = write!(out, "{e}");
                0
            }
            _ => {
                let e = ShellError::usage(e.to_string().trim_end());
                report(&e, json, err);
                e.exit_code()
            }
        },
        Ok(cli) => match run(&cli, out) {
            Ok(()) => 0,
            Err(e) => {
                report(&e, cli.json, err);
                e.exit_code()
            }
        },
    }
}
