export * from './api';
export * from './ruleDraft';
export * from './resultGrid';
export * from './sweepMonitor';
