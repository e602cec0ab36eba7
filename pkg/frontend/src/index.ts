export * from './types.js';
export * from './mixer.js';
export * from './keyboard.js';
export * from './playback.js';
export * from './debounce.js';
export * from './client.js';
export * from './console.js';
