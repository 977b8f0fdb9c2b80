export { AdapterRequest, AdapterResponse, Op, parseRequest, serializeResponse, UNPARSEABLE_ID } from './protocol';
export { AdapterConfig, Backend, ConfigError, createBackend, EchoBackend, ECHO_VECTOR, Mode, MODES } from './backends';
export { serve } from './server';
