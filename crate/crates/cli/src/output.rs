//! Output files: provenance headers, CSV/JSON writers and plot scripts.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a command writes, plus what it records about the run.
pub struct Sink {
    pub dir: PathBuf,
    pub command: &'static str,
    pub config: RunConfig,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, command: &'static str, config: &RunConfig) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        // the output location does not affect results; leave it out so that
        // identical runs produce identical files wherever they are written
        let mut recorded = config.clone();
        recorded.run.out = None;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            config: recorded,
            written: Vec::new(),
        })
    }

    /// `#` lines naming the tool, command and full resolved configuration.
    pub fn provenance(&self, w: &mut dyn Write, extra: &[(&str, String)]) -> io::Result<()> {
        writeln!(w, "# otto-ldf {VERSION}")?;
        writeln!(w, "# command = {}", self.command)?;
        for (k, v) in extra {
            writeln!(w, "# {k} = {v}")?;
        }
        writeln!(w, "# config:")?;
        for line in self.config.to_toml().lines() {
            if line.is_empty() {
                writeln!(w, "#")?;
            } else {
                writeln!(w, "#   {line}")?;
            }
        }
        Ok(())
    }

    pub fn csv(
        &mut self,
        name: &str,
        extra: &[(&str, String)],
        body: impl FnOnce(&mut dyn Write) -> io::Result<()>,
    ) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        self.provenance(&mut w, extra)?;
        body(&mut w)?;
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// JSON document with `version`, `command` and `config` added to `value`.
    pub fn json(&mut self, name: &str, mut value: serde_json::Value) -> io::Result<PathBuf> {
        if let Some(obj) = value.as_object_mut() {
            obj.insert("version".into(), VERSION.into());
            obj.insert("command".into(), self.command.into());
            obj.insert(
                "config".into(),
                serde_json::to_value(&self.config).map_err(io::Error::other)?,
            );
        }
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        serde_json::to_writer_pretty(&mut w, &value).map_err(io::Error::other)?;
        writeln!(w)?;
        w.flush()?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn script(&mut self, name: &str, text: &str) -> io::Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.written.push(path.clone());
        Ok(path)
    }
}

pub const PLOT_PEARSON: &str = r##"# Pearson coefficient against Q*, from pearson_*.csv in this directory.
import glob
import matplotlib.pyplot as plt
import numpy as np

for path in sorted(glob.glob("pearson_*.csv")):
    data = np.genfromtxt(path, delimiter=",", comments="#", names=True, dtype=None, encoding=None)
    plt.plot(data["q_star"], data["rho"], label=path[len("pearson_"):-4])
plt.xlabel("Q*")
plt.ylabel("rho")
plt.legend()
plt.savefig("pearson.png", dpi=150)
"##;

pub const PLOT_LDF: &str = r##"# Efficiency rate functions, from ldf_*.csv in this directory.
import glob
import matplotlib.pyplot as plt
import numpy as np

for path in sorted(glob.glob("ldf_*.csv")):
    data = np.genfromtxt(path, delimiter=",", comments="#", names=True, dtype=None, encoding=None)
    j = np.where(np.isfinite(data["j"]), data["j"], np.nan)
    plt.plot(data["eta"], j, label=path[len("ldf_"):-4])
plt.xlabel("eta")
plt.ylabel("J(eta)")
plt.legend()
plt.savefig("ldf.png", dpi=150)
"##;

pub const PLOT_CONTOUR: &str = r##"# Contours of phi(gamma1, gamma2), from contour_*.csv in this directory.
# Undefined cells are shown as the masked (dark) region.
import glob
import matplotlib.pyplot as plt
import numpy as np

for path in sorted(glob.glob("contour_*.csv")):
    data = np.genfromtxt(path, delimiter=",", comments="#", names=True, dtype=None, encoding=None)
    g1 = np.unique(data["gamma1"])
    g2 = np.unique(data["gamma2"])
    phi = np.array(data["phi"], dtype=float).reshape(len(g2), len(g1))
    plt.figure()
    plt.contourf(g1, g2, np.ma.masked_invalid(phi), levels=40)
    plt.colorbar(label="phi")
    plt.gca().set_facecolor("midnightblue")
    plt.xlabel("gamma1")
    plt.ylabel("gamma2")
    plt.title(path[len("contour_"):-4])
    plt.savefig(path[:-4] + ".png", dpi=150)
"##;

pub const PLOT_SAMPLE: &str = r##"# Empirical rate -ln(p)/s against the analytic curve, from sample_*_rate.csv
# and, when present, ldf_*.csv in this directory.
import glob
import matplotlib.pyplot as plt
import numpy as np

for path in sorted(glob.glob("sample_*_rate.csv")):
    data = np.genfromtxt(path, delimiter=",", comments="#", names=True, dtype=None, encoding=None)
    plt.errorbar(data["eta"], data["rate"], yerr=data["std_error"], fmt=".", label=path[len("sample_"):-9])
for path in sorted(glob.glob("ldf_*_exact.csv")):
    data = np.genfromtxt(path, delimiter=",", comments="#", names=True, dtype=None, encoding=None)
    plt.plot(data["eta"], np.where(np.isfinite(data["j"]), data["j"], np.nan), label=path[:-4])
plt.xlabel("eta")
plt.ylabel("-ln(p)/s")
plt.legend()
plt.savefig("sample.png", dpi=150)
"##;
