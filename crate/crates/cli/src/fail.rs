use std::fmt::Display;
use std::process::ExitCode;

/// Process exit codes. Stable for scripting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config = 1,
    Data = 2,
    Backend = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: Kind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn config(msg: impl Display) -> Self {
        Self::new(Kind::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn data(msg: impl Display) -> Self {
        Self::new(Kind::Data, anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }
}

pub type Outcome<T> = Result<T, Failure>;

/// Tags an error with its exit kind and a line of context.
pub trait Tag<T> {
    fn tag<C: Display + Send + Sync + 'static>(self, kind: Kind, context: C) -> Outcome<T>;

    fn config<C: Display + Send + Sync + 'static>(self, context: C) -> Outcome<T>
    where
        Self: Sized,
    {
        self.tag(Kind::Config, context)
    }

    fn data<C: Display + Send + Sync + 'static>(self, context: C) -> Outcome<T>
    where
        Self: Sized,
    {
        self.tag(Kind::Data, context)
    }

    fn backend<C: Display + Send + Sync + 'static>(self, context: C) -> Outcome<T>
    where
        Self: Sized,
    {
        self.tag(Kind::Backend, context)
    }
}

impl<T, E> Tag<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn tag<C: Display + Send + Sync + 'static>(self, kind: Kind, context: C) -> Outcome<T> {
        self.map_err(|e| Failure::new(kind, e.into().context(context)))
    }
}
