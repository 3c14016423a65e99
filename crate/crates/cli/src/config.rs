//! JSON configuration. Relative paths resolve against the config file's
//! directory. The API key never lives here; it comes from `GENIA_API_KEY`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use genia_core::crawler::{CrawlerConfig, DEFAULT_PAGE_BUDGET, DESKTOP_USER_AGENT};
use genia_core::gateway::template::DEFAULT_PROMPT_BUDGET;
use genia_core::gateway::{GatewaySettings, PromptLevel, PromptSet, RetryPolicy, SchemaRole};
use genia_core::modularizer::BaselineOptions;
use genia_core::scriptgen::Whitelist;
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub timeout_secs: u64,
    /// Total attempts on 429 and 5xx answers.
    pub attempts: u32,
    pub backoff_ms: u64,
    pub schema_role: SchemaRole,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o-mini".into(),
            temperature: 0.0,
            max_tokens: None,
            timeout_secs: 120,
            attempts: 3,
            backoff_ms: 2000,
            schema_role: SchemaRole::User,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub prompt_chars: usize,
    pub page_chars: usize,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            prompt_chars: DEFAULT_PROMPT_BUDGET,
            page_chars: DEFAULT_PAGE_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrawlConfig {
    pub timeout_secs: u64,
    pub user_agent: String,
}

impl Default for CrawlConfig {
    fn default() -> Self {
        CrawlConfig {
            timeout_secs: 30,
            user_agent: DESKTOP_USER_AGENT.into(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemplateConfig {
    pub modularize: Option<PathBuf>,
    pub extract: Option<PathBuf>,
    pub refine: Option<PathBuf>,
    pub generate: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub navigation_phrases: Vec<String>,
    pub transition_verbs: Vec<String>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let d = BaselineOptions::default();
        BaselineConfig {
            navigation_phrases: d.navigation_phrases,
            transition_verbs: d.transition_verbs,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub provider: ProviderConfig,
    pub budgets: BudgetConfig,
    pub crawler: CrawlConfig,
    pub templates: TemplateConfig,
    pub whitelist: Option<PathBuf>,
    pub baseline: BaselineConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut config: Config = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(x) = p {
                if x.is_relative() {
                    *x = base.join(&*x);
                }
            }
        };
        resolve(&mut config.templates.modularize);
        resolve(&mut config.templates.extract);
        resolve(&mut config.templates.refine);
        resolve(&mut config.templates.generate);
        resolve(&mut config.whitelist);
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=2.0).contains(&self.provider.temperature) {
            return Err(format!("provider.temperature {} outside [0, 2]", self.provider.temperature));
        }
        if self.provider.attempts == 0 {
            return Err("provider.attempts must be at least 1".into());
        }
        if self.budgets.page_chars == 0 || self.budgets.prompt_chars == 0 {
            return Err("budgets must be positive".into());
        }
        url::Url::parse(&self.provider.base_url).map_err(|e| format!("provider.base_url: {e}"))?;
        Ok(())
    }

    pub fn gateway_settings(&self) -> GatewaySettings {
        GatewaySettings {
            model: self.provider.model.clone(),
            temperature: self.provider.temperature,
            max_tokens: self.provider.max_tokens,
            schema_role: self.provider.schema_role,
            prompt_budget: self.budgets.prompt_chars,
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            attempts: self.provider.attempts,
            backoff_base: Duration::from_millis(self.provider.backoff_ms),
        }
    }

    pub fn provider_timeout(&self) -> Duration {
        Duration::from_secs(self.provider.timeout_secs)
    }

    pub fn crawler_config(&self) -> CrawlerConfig {
        CrawlerConfig {
            timeout: Duration::from_secs(self.crawler.timeout_secs),
            user_agent: self.crawler.user_agent.clone(),
            budget: self.budgets.page_chars,
        }
    }

    pub fn prompts(&self) -> Result<PromptSet, String> {
        let mut set = PromptSet::default();
        let t = &self.templates;
        for (level, path) in [
            (PromptLevel::Modularize, &t.modularize),
            (PromptLevel::Extract, &t.extract),
            (PromptLevel::Refine, &t.refine),
            (PromptLevel::Generate, &t.generate),
        ] {
            if let Some(p) = path {
                set.load_override(level, p).map_err(|e| e.to_string())?;
            }
        }
        Ok(set)
    }

    pub fn whitelist(&self) -> Result<Whitelist, String> {
        match &self.whitelist {
            Some(p) => Whitelist::load(p),
            None => Ok(Whitelist::default()),
        }
    }

    pub fn baseline_options(&self) -> BaselineOptions {
        BaselineOptions {
            navigation_phrases: self.baseline.navigation_phrases.iter().map(|p| p.to_lowercase()).collect(),
            transition_verbs: self.baseline.transition_verbs.iter().map(|v| v.to_lowercase()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("genia.json");
        fs::write(
            &path,
            r#"{"provider": {"model": "local-model", "base_url": "http://127.0.0.1:8080/v1"},
                "budgets": {"page_chars": 5000}, "whitelist": "kw.txt"}"#,
        )
        .unwrap();
        let c = Config::load(&path).unwrap();
        assert_eq!(c.provider.model, "local-model");
        assert_eq!(c.provider.attempts, 3);
        assert_eq!(c.budgets.page_chars, 5000);
        assert_eq!(c.budgets.prompt_chars, DEFAULT_PROMPT_BUDGET);
        assert_eq!(c.whitelist.as_deref(), Some(dir.path().join("kw.txt").as_path()));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        fs::write(&path, r#"{"provider": {"api_key": "nope"}}"#).unwrap();
        assert!(Config::load(&path).unwrap_err().contains("api_key"));
        fs::write(&path, r#"{"provider": {"temperature": 3}}"#).unwrap();
        assert!(Config::load(&path).is_err());
    }
}
