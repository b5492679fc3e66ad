//! Result table plus the checks evaluated while filling it.

use std::fmt;

use qcf_core::CsvTable;

/// Why a run is not clean. Ordered by precedence when choosing the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FailureClass {
    /// A numerical routine returned an error; the table is partial.
    Compute,
    /// A proven or definitional property did not hold.
    Assertion,
    /// Numerical evidence for an unproven scaling claim did not hold.
    Conjecture,
}

impl FailureClass {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureClass::Compute => 1,
            FailureClass::Assertion => 2,
            FailureClass::Conjecture => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::Compute => "compute-error",
            FailureClass::Assertion => "assertion-failed",
            FailureClass::Conjecture => "conjecture-evidence-violated",
        }
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub class: FailureClass,
    pub check: String,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub table: CsvTable,
    pub failures: Vec<Failure>,
    passed: usize,
}

impl Report {
    pub fn new(table: CsvTable) -> Self {
        Self { table, failures: Vec::new(), passed: 0 }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.table.comment(line);
    }

    /// Records a check; `detail` is only rendered on failure.
    pub fn check(&mut self, ok: bool, class: FailureClass, check: &str, detail: impl FnOnce() -> String) -> bool {
        if ok {
            self.passed += 1;
        } else {
            self.fail(class, check, detail());
        }
        ok
    }

    pub fn fail(&mut self, class: FailureClass, check: &str, detail: impl Into<String>) {
        let detail: String = detail.into();
        self.table.comment(format!("failure class={class} check={check} detail={}", detail.replace(';', ",")));
        self.failures.push(Failure { class, check: check.to_string(), detail });
    }

    pub fn worst(&self) -> Option<FailureClass> {
        self.failures.iter().map(|f| f.class).min()
    }

    pub fn exit_code(&self) -> i32 {
        self.worst().map_or(0, FailureClass::exit_code)
    }

    pub fn passed(&self) -> usize {
        self.passed
    }

    /// Appends the status line, which is always the last comment.
    pub fn finish(mut self) -> Self {
        let line = match self.worst() {
            None => format!("status=ok;checks_passed={}", self.passed),
            Some(class) => {
                let first = self.failures.iter().find(|f| f.class == class).expect("worst class has a failure");
                format!(
                    "status=fail;exit={};class={class};check={};failures={};checks_passed={}",
                    class.exit_code(),
                    first.check,
                    self.failures.len(),
                    self.passed
                )
            }
        };
        self.table.comment(line);
        self
    }

    pub fn render(&self) -> String {
        self.table.render()
    }
}
